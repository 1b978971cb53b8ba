"""Pointwise geometry of one face and its artifact exports.

The null lift F maps to de Sitter 3-space by f = F e3 F*, a Hermitian
matrix of determinant -1.  Everything here works on top of that
projection: the timelike unit normal and the light-cone Gauss map, the
four natural conformal metric factors, marching-squares tracing of the
singular set {|g| = 1}, the stereographic chart of the x0 > 1 region,
and OBJ/PLY/SVG/CSV emission.

Multivalued data is evaluated on one branch sheet.  Grids are marched
point to point with shared branch trackers (rows chained off the first
column), so a simply connected window gets a consistent single-valued
evaluation; one-off evaluations use the principal branch.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass

import numpy as np

from .algebra import (
    E3,
    MinkowskiVec,
    herm_to_mink,
    minkowski_product,
)
from .expr import ContinuedFn, Expr, differentiate, eval_principal
from .frames import SurfaceData, integrate_frame
from .monodromy import EndReport, Sectors

__all__ = [
    "project_to_s31",
    "normal_vector",
    "lightcone_projection",
    "GaussMapSample",
    "gauss_maps_at",
    "MetricSample",
    "metrics_at",
    "SurfaceSample",
    "sample_at",
    "DomainGrid",
    "rectangle_grid",
    "annulus_grid",
    "sample_grid",
    "MeshReport",
    "export_mesh",
    "SingularCurve",
    "trace_singular_set",
    "ray_crossings",
    "stereographic",
    "export_singular_svg",
    "export_samples_csv",
]


# ---------------------------------------------------------------------------
# projection and pointwise vectors


def project_to_s31(F: np.ndarray, tol: float = 1e-8) -> MinkowskiVec:
    """Point f = F e3 F* of S^3_1 as a Minkowski vector.

    F must be unimodular: the image has <f, f> = -det(F e3 F*) = 1
    exactly when det F = 1, so determinant drift beyond ``tol`` is
    rejected rather than silently projected.
    """
    F = np.asarray(F, dtype=complex)
    det = complex(np.linalg.det(F))
    if abs(det - 1.0) > tol:
        raise ValueError(
            f"lift determinant drifted to {det:.12g} (tol {tol:.1e})")
    X = F @ E3 @ F.conj().T
    X = (X + X.conj().T) / 2.0
    return herm_to_mink(X)


def normal_vector(F: np.ndarray, g_value: complex) -> MinkowskiVec:
    """Timelike unit normal nu at a regular point.

    nu = F [[1+|g|^2, 2g], [2 conj(g), 1+|g|^2]] F* / (|g|^2 - 1);
    undefined on the singular set |g| = 1.
    """
    gg = abs(g_value) ** 2
    if gg == 1.0:
        raise ValueError("unit normal undefined where |g| = 1")
    F = np.asarray(F, dtype=complex)
    N = np.array([[1 + gg, 2 * g_value],
                  [2 * np.conj(g_value), 1 + gg]]) / (gg - 1.0)
    X = F @ N @ F.conj().T
    X = (X + X.conj().T) / 2.0
    return herm_to_mink(X)


def lightcone_projection(v: MinkowskiVec) -> complex:
    """Boundary chart (x1 + i x2)/(x0 - x3) identifying each component
    of the ideal boundary with the extended plane."""
    den = v.x0 - v.x3
    if den == 0.0:
        return complex(math.inf, 0.0)
    return complex(v.x1, v.x2) / den


def stereographic(v: MinkowskiVec) -> np.ndarray:
    """Chart (x1, x2, x3)/(1 + x0) of the x0 > 1 region, a
    diffeomorphism onto the open shell 1/2 < |X|^2 < 1."""
    if not v.x0 > 1.0:
        raise ValueError(f"stereographic chart needs x0 > 1, got {v.x0:.6g}")
    return np.array([v.x1, v.x2, v.x3]) / (1.0 + v.x0)


# ---------------------------------------------------------------------------
# pointwise samples


@dataclass(frozen=True)
class GaussMapSample:
    """Both Gauss maps at one point, with the light-cone data.

    ``lightcone`` is the boundary chart value of [f + nu]; on a face it
    agrees with the hyperbolic Gauss map.  ``component`` is +1 when the
    light-cone Gauss map lands in the future boundary component (|g| >
    1), -1 for the past one.  Both are None on the singular set, where
    only the hyperbolic Gauss map extends.
    """

    point: complex
    hyperbolic: complex
    secondary: complex
    lightcone: complex | None
    component: int | None
    normal: MinkowskiVec | None


def _principal_frame(data: SurfaceData, z: complex) -> np.ndarray:
    if data.lift is not None:
        return np.array([[eval_principal(data.lift[0], z),
                          eval_principal(data.lift[1], z)],
                         [eval_principal(data.lift[2], z),
                          eval_principal(data.lift[3], z)]])
    return np.eye(2, dtype=complex)


def gauss_maps_at(
    data: SurfaceData,
    point: complex,
    frame: np.ndarray | None = None,
    tol: float = 1e-6,
) -> GaussMapSample:
    """Evaluate G, g and the light-cone Gauss map at one point.

    ``frame`` fixes the lift value; by default the closed-form lift is
    evaluated on the principal branch, and data without one gets the
    identity-normalized frame (its hyperbolic Gauss map then reflects
    that normalization).  Points with ||g| - 1| <= tol count as
    singular: the normal and light-cone entries come back None.
    """
    z = complex(point)
    F = _principal_frame(data, z) if frame is None else \
        np.asarray(frame, dtype=complex)
    gv = eval_principal(data.secondary_gauss, z)
    # (g F11 + F12)/(g F21 + F22) equals dF11/dF21 for any solution of
    # the lift equation, and extends across the singular set
    if data.hyperbolic_gauss is not None and frame is None:
        Gv = eval_principal(data.hyperbolic_gauss, z)
    else:
        num = gv * F[0, 0] + F[0, 1]
        den = gv * F[1, 0] + F[1, 1]
        Gv = num / den if den != 0 else complex(math.inf, 0.0)
    if abs(abs(gv) - 1.0) <= tol:
        return GaussMapSample(z, Gv, gv, None, None, None)
    nu = normal_vector(F, gv)
    f = project_to_s31(F)
    L = MinkowskiVec(f.x0 + nu.x0, f.x1 + nu.x1, f.x2 + nu.x2, f.x3 + nu.x3)
    return GaussMapSample(z, Gv, gv, lightcone_projection(L),
                          1 if abs(gv) > 1.0 else -1, nu)


@dataclass(frozen=True)
class MetricSample:
    """Conformal factors of the four natural metrics at one point.

    ds2 is the induced metric (degenerate exactly on |g| = 1), dshat2
    the Riemannian cousin with (1 + |g|^2)^2, dsigma2 the pullback of
    the curvature -1 pseudometric by g (infinite on the singular set),
    and dsharp2 the lift metric (None when the data carries no
    hyperbolic Gauss map).  ``hopf`` is the Hopf coefficient.
    """

    point: complex
    ds2: float
    dshat2: float
    dsigma2: float
    dsharp2: float | None
    hopf: complex


def metrics_at(data: SurfaceData, point: complex) -> MetricSample:
    """ds^2 = (1-|g|^2)^2 |w|^2, dshat^2 = (1+|g|^2)^2 |w|^2,
    dsigma^2 = 4 |g'|^2 / (1-|g|^2)^2, dsharp^2 = (1+|G|^2)^2 |Q/G'|^2,
    all on the principal branch."""
    z = complex(point)
    gv = eval_principal(data.secondary_gauss, z)
    wv = eval_principal(data.omega, z)
    dgv = eval_principal(differentiate(data.secondary_gauss), z)
    if not all(cmath.isfinite(v) for v in (gv, wv, dgv)):
        raise ValueError(f"metric evaluation at a pole of the data, z = {z}")
    return MetricSample(z, *_metric_factors(gv, wv, dgv, dgv * wv,
                                            *_gauss_pair_values(data, z)),
                        hopf=dgv * wv)


def _gauss_pair_values(data: SurfaceData, z: complex):
    if data.hyperbolic_gauss is None:
        return None, None
    return (eval_principal(data.hyperbolic_gauss, z),
            eval_principal(differentiate(data.hyperbolic_gauss), z))


def _metric_factors(gv, wv, dgv, qv, Gv, dGv):
    gg = abs(gv) ** 2
    ww = abs(wv) ** 2
    ds2 = (1.0 - gg) ** 2 * ww
    dshat2 = (1.0 + gg) ** 2 * ww
    if gg == 1.0:
        dsigma2 = math.inf if dgv != 0 else 0.0
    else:
        dsigma2 = 4.0 * abs(dgv) ** 2 / (1.0 - gg) ** 2
    dsharp2 = None
    if Gv is not None and dGv is not None and dGv != 0:
        dsharp2 = (1.0 + abs(Gv) ** 2) ** 2 * abs(qv / dGv) ** 2
    return ds2, dshat2, dsigma2, dsharp2


@dataclass(frozen=True)
class SurfaceSample:
    """One evaluated point of the face.

    ``position`` satisfies <f, f> = 1; ``normal`` is None on the
    singular set; ``sing`` = |g|^2 - 1 changes sign exactly across it;
    ``branch`` records the branch sheet of g the sample was continued
    on (None for principal one-off evaluation).
    """

    point: complex
    position: MinkowskiVec
    normal: MinkowskiVec | None
    ds2: float
    dshat2: float
    dsigma2: float
    dsharp2: float | None
    sing: float
    branch: object | None = None


_SING_TOL = 1e-9


def _build_sample(z, F, gv, wv, dgv, qv, Gv, dGv, branch=None,
                  proj_tol=1e-6) -> SurfaceSample:
    if not (np.all(np.isfinite(F)) and cmath.isfinite(gv)):
        # a pole or branch blow-up, not integration drift: emit an
        # invalid sample rather than a misleading determinant error
        nan = math.nan
        return SurfaceSample(z, MinkowskiVec(nan, nan, nan, nan), None,
                             nan, nan, nan, None, nan, branch)
    position = project_to_s31(F, tol=proj_tol)
    sing = abs(gv) ** 2 - 1.0
    normal = normal_vector(F, gv) if abs(sing) > _SING_TOL else None
    ds2, dshat2, dsigma2, dsharp2 = _metric_factors(gv, wv, dgv, qv, Gv, dGv)
    return SurfaceSample(z, position, normal, ds2, dshat2, dsigma2,
                         dsharp2, sing, branch)


def sample_at(data: SurfaceData, point: complex,
              frame: np.ndarray | None = None) -> SurfaceSample:
    """One-off sample on the principal branch (see ``gauss_maps_at``
    for how the frame is chosen)."""
    z = complex(point)
    F = _principal_frame(data, z) if frame is None else \
        np.asarray(frame, dtype=complex)
    gv = eval_principal(data.secondary_gauss, z)
    wv = eval_principal(data.omega, z)
    dgv = eval_principal(differentiate(data.secondary_gauss), z)
    Gv, dGv = _gauss_pair_values(data, z)
    return _build_sample(z, F, gv, wv, dgv, dgv * wv, Gv, dGv)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class DomainGrid:
    """Rectangular array of domain points, row major.

    ``wrap_columns`` stitches the last column back to the first when
    building meshes; only meaningful when the data returns to the same
    value there (single-valued data on a full annulus).
    """

    points: np.ndarray
    wrap_columns: bool = False


def rectangle_grid(x_range, y_range, nx: int, ny: int) -> DomainGrid:
    xs = np.linspace(x_range[0], x_range[1], nx)
    ys = np.linspace(y_range[0], y_range[1], ny)
    X, Y = np.meshgrid(xs, ys)
    return DomainGrid(X + 1j * Y)


def annulus_grid(r_inner: float, r_outer: float, n_r: int, n_theta: int,
                 angle_range=(-math.pi, math.pi), center: complex = 0.0,
                 wrap: bool = False) -> DomainGrid:
    """Polar grid; rows sweep radius, columns sweep angle.  With
    ``wrap`` the angular range should cover the full turn minus one
    step, and the mesh closes over the seam."""
    rs = np.linspace(r_inner, r_outer, n_r)
    ts = np.linspace(angle_range[0], angle_range[1], n_theta)
    R, T = np.meshgrid(rs, ts, indexing="ij")
    return DomainGrid(center + R * np.exp(1j * T), wrap_columns=wrap)


def sample_grid(data: SurfaceData, grid: DomainGrid,
                proj_tol: float = 1e-6) -> list[list[SurfaceSample]]:
    """Evaluate the face on every grid point with consistent branches.

    The first column is marched downward from the top-left anchor, and
    each row is then marched off its first point, so any two grid
    points are connected through a path inside the grid and the samples
    live on one branch sheet.  Data without a closed-form lift gets its
    frames by integrating the lift equation along the same paths.
    """
    pts = np.asarray(grid.points, dtype=complex)
    rows, cols = pts.shape
    g_expr = data.secondary_gauss
    w_expr = data.omega
    named = {
        "g": g_expr,
        "dg": differentiate(g_expr),
        "w": w_expr,
    }
    if data.hyperbolic_gauss is not None:
        named["G"] = data.hyperbolic_gauss
        named["dG"] = differentiate(data.hyperbolic_gauss)
    lift = data.lift
    if lift is not None:
        for k, e in zip(("f11", "f12", "f21", "f22"), lift):
            named[k] = e

    anchor = {k: ContinuedFn(e, pts[0, 0]) for k, e in named.items()}
    F_anchor = np.eye(2, dtype=complex)

    out: list[list[SurfaceSample]] = []
    for r in range(rows):
        if r > 0:
            if lift is None:
                res = integrate_frame(
                    g_expr, w_expr, [pts[r - 1, 0], pts[r, 0]],
                    frame_start=F_anchor,
                    gauss_fn=anchor["g"], omega_fn=anchor["w"])
                F_anchor = res.frame
            for k, fn in anchor.items():
                if lift is not None or k not in ("g", "w"):
                    fn.advance(pts[r, 0])
        row_fns = {k: ContinuedFn(named[k], pts[r, 0], state=fn.state)
                   for k, fn in anchor.items()}
        F_row = F_anchor.copy()
        row_out = []
        for c in range(cols):
            if c > 0:
                if lift is None:
                    res = integrate_frame(
                        g_expr, w_expr, [pts[r, c - 1], pts[r, c]],
                        frame_start=F_row,
                        gauss_fn=row_fns["g"], omega_fn=row_fns["w"])
                    F_row = res.frame
                for k, fn in row_fns.items():
                    if lift is not None or k not in ("g", "w"):
                        fn.advance(pts[r, c])
            if lift is not None:
                F_row = np.array([[row_fns["f11"].value,
                                   row_fns["f12"].value],
                                  [row_fns["f21"].value,
                                   row_fns["f22"].value]])
            gv = row_fns["g"].value
            wv = row_fns["w"].value
            dgv = row_fns["dg"].value
            Gv = row_fns["G"].value if "G" in row_fns else None
            dGv = row_fns["dG"].value if "dG" in row_fns else None
            row_out.append(_build_sample(
                pts[r, c], F_row, gv, wv, dgv, dgv * wv, Gv, dGv,
                branch=row_fns["g"].state, proj_tol=proj_tol))
        out.append(row_out)
    return out


# ---------------------------------------------------------------------------
# mesh export


@dataclass(frozen=True)
class MeshReport:
    path: str
    vertex_count: int
    face_count: int
    unprojected_count: int
    skipped_cells: int


def _mesh_vertices(samples):
    """Per-sample export coordinates: the stereographic chart where it
    applies (x0 > 1), raw spatial coordinates (flagged) elsewhere."""
    verts = []
    for row in samples:
        vrow = []
        for s in row:
            p = s.position
            coords = np.array([p.x0, p.x1, p.x2, p.x3])
            if not np.all(np.isfinite(coords)):
                vrow.append(None)
            elif p.x0 > 1.0:
                vrow.append((stereographic(p), True, s.sing))
            else:
                vrow.append((np.array([p.x1, p.x2, p.x3]), False, s.sing))
        verts.append(vrow)
    return verts


def export_mesh(
    data: SurfaceData,
    grid: DomainGrid,
    path: str,
    fmt: str = "obj",
    skip_singular_cells: bool = False,
    proj_tol: float = 1e-6,
    samples: list[list[SurfaceSample]] | None = None,
) -> MeshReport:
    """Write the face over ``grid`` as an ASCII OBJ or PLY mesh.

    Vertices use the stereographic chart; points with x0 <= 1 fall back
    to their raw spatial coordinates and are flagged (OBJ: faces in a
    separate group, PLY: per-vertex ``projected`` property).  PLY also
    carries the singularity indicator |g|^2 - 1 per vertex.  Cells with
    an invalid corner are dropped, as are cells straddling the singular
    set when ``skip_singular_cells`` is on.  Raises ValueError when the
    grid produced no usable vertex at all.  Pass ``samples`` (from
    ``sample_grid`` over the same grid) to reuse one evaluation across
    several exports.
    """
    if fmt not in ("obj", "ply"):
        raise ValueError(f"unknown mesh format {fmt!r}")
    if samples is None:
        samples = sample_grid(data, grid, proj_tol=proj_tol)
    verts = _mesh_vertices(samples)
    rows = len(verts)
    cols = len(verts[0])

    index = {}
    flat = []
    for r in range(rows):
        for c in range(cols):
            if verts[r][c] is not None:
                index[(r, c)] = len(flat)
                flat.append(verts[r][c])
    if not flat:
        raise ValueError("no valid vertices in the grid window")

    faces = []
    skipped = 0
    col_pairs = [(c, c + 1) for c in range(cols - 1)]
    if grid.wrap_columns:
        col_pairs.append((cols - 1, 0))
    for r in range(rows - 1):
        for c0, c1 in col_pairs:
            corners = [(r, c0), (r, c1), (r + 1, c1), (r + 1, c0)]
            if any(k not in index for k in corners):
                skipped += 1
                continue
            sings = [flat[index[k]][2] for k in corners]
            if skip_singular_cells and min(sings) < 0.0 < max(sings):
                skipped += 1
                continue
            a, b, cc, d = (index[k] for k in corners)
            flagged = not all(flat[i][1] for i in (a, b, cc, d))
            faces.append((a, b, cc, flagged))
            faces.append((a, cc, d, flagged))

    unprojected = sum(1 for v in flat if not v[1])
    if fmt == "obj":
        _write_obj(path, flat, faces)
    else:
        _write_ply(path, flat, faces)
    return MeshReport(path, len(flat), len(faces), unprojected, skipped)


def _write_obj(path, flat, faces):
    with open(path, "w") as fh:
        for coords, _, _ in flat:
            fh.write(f"v {coords[0]:.9g} {coords[1]:.9g} {coords[2]:.9g}\n")
        fh.write("g projected\n")
        for a, b, c, flagged in faces:
            if not flagged:
                fh.write(f"f {a + 1} {b + 1} {c + 1}\n")
        fh.write("g unprojected\n")
        for a, b, c, flagged in faces:
            if flagged:
                fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def _write_ply(path, flat, faces):
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(flat)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property float sing\nproperty uchar projected\n")
        fh.write(f"element face {len(faces)}\n")
        fh.write("property list uchar int vertex_indices\n")
        fh.write("end_header\n")
        for coords, projected, sing in flat:
            fh.write(f"{coords[0]:.9g} {coords[1]:.9g} {coords[2]:.9g} "
                     f"{sing:.9g} {1 if projected else 0}\n")
        for a, b, c, _ in faces:
            fh.write(f"3 {a} {b} {c}\n")


# ---------------------------------------------------------------------------
# singular set tracing


@dataclass(frozen=True)
class SingularCurve:
    """One traced component of {|g| = 1}, ordered along the curve.

    ``annotation`` is ("circle", radius), ("spiral", pitch) with pitch
    = d log r / d theta, ("sector-contained", m, delta, eps) when every
    point sits within angle eps of the ray family delta + k pi/m, or
    ("generic",).  ``residual`` is the worst |log|g|| over the
    vertices.
    """

    points: np.ndarray
    closed: bool
    annotation: tuple
    residual: float


def _log_abs_g(data: SurfaceData, zs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.abs(eval_principal(data.secondary_gauss, zs))
        out = np.log(vals)
    out[~np.isfinite(out)] = np.nan
    return out


def _refine_crossings(data, za, zb, ha, hb, refine_tol):
    """Vectorized bisection of sign-change edges; at least 16 rounds,
    then until every residual is under refine_tol (cap 60)."""
    za = za.copy()
    zb = zb.copy()
    ha = ha.copy()
    hb = hb.copy()
    zm, hm = za, ha
    for it in range(60):
        zm = (za + zb) / 2.0
        hm = _log_abs_g(data, zm)
        left = (ha <= 0) == (hm <= 0)
        za = np.where(left, zm, za)
        ha = np.where(left, hm, ha)
        zb = np.where(left, zb, zm)
        hb = np.where(left, hb, hm)
        if it >= 15 and float(np.nanmax(np.abs(hm))) < refine_tol:
            break
    return zm, np.abs(hm)


def _march_cells(h, crossings, nodes_x, nodes_y, field):
    """Marching-squares connectivity: returns segments as pairs of edge
    ids.  ``crossings`` maps edge id -> crossing index; ``field``
    evaluates log|g| (used only to break saddle ambiguities)."""
    segs = []
    ny, nx = h.shape
    for i in range(ny - 1):
        for j in range(nx - 1):
            corners = (h[i, j], h[i, j + 1], h[i + 1, j + 1], h[i + 1, j])
            if any(np.isnan(v) for v in corners):
                continue
            edges = [("h", i, j), ("v", i, j + 1),
                     ("h", i + 1, j), ("v", i, j)]
            hit = [e for e in edges if e in crossings]
            if len(hit) == 2:
                segs.append((hit[0], hit[1]))
            elif len(hit) == 4:
                # saddle: the center sample decides the diagonal pairing
                zc = complex((nodes_x[j] + nodes_x[j + 1]) / 2,
                             (nodes_y[i] + nodes_y[i + 1]) / 2)
                hc = float(field(np.array([zc]))[0])
                if (hc > 0) == (corners[0] > 0):
                    segs.append((("h", i, j), ("v", i, j + 1)))
                    segs.append((("h", i + 1, j), ("v", i, j)))
                else:
                    segs.append((("h", i, j), ("v", i, j)))
                    segs.append((("h", i + 1, j), ("v", i, j + 1)))
    return segs


def _walk_curves(segs, crossings, points):
    """Chain marching-squares segments into ordered index lists; open
    curves start from degree-1 nodes, the rest are cycles."""
    adjacency: dict = {}
    for a, b in segs:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)

    def key(e):
        return (points[crossings[e]].real, points[crossings[e]].imag)

    visited = set()
    curves = []
    starts = sorted((e for e, nb in adjacency.items() if len(nb) == 1),
                    key=key)
    remaining = sorted(adjacency.keys(), key=key)
    for pool, expect_cycle in ((starts, False), (remaining, True)):
        for start in pool:
            if start in visited:
                continue
            chain = [start]
            visited.add(start)
            cur = start
            prev = None
            while True:
                nxt = [e for e in adjacency[cur] if e != prev and
                       e not in visited]
                if not nxt:
                    break
                prev, cur = cur, nxt[0]
                chain.append(cur)
                visited.add(cur)
            is_closed = expect_cycle and len(chain) > 2 and \
                chain[0] in adjacency.get(chain[-1], [])
            curves.append(([crossings[e] for e in chain], is_closed))
    return curves


def _trace_topology(data, window, resolution, refine_tol, refine=True):
    x0, x1, y0, y1 = window
    nodes_x = np.linspace(x0, x1, resolution + 1)
    nodes_y = np.linspace(y0, y1, resolution + 1)
    X, Y = np.meshgrid(nodes_x, nodes_y)
    Z = X + 1j * Y
    h = _log_abs_g(data, Z)

    edge_ids = []
    za, zb, ha, hb = [], [], [], []
    ny, nx = h.shape
    for i in range(ny):
        for j in range(nx - 1):
            a, b = h[i, j], h[i, j + 1]
            if np.isfinite(a) and np.isfinite(b) and (a <= 0) != (b <= 0):
                edge_ids.append(("h", i, j))
                za.append(Z[i, j]), zb.append(Z[i, j + 1])
                ha.append(a), hb.append(b)
    for i in range(ny - 1):
        for j in range(nx):
            a, b = h[i, j], h[i + 1, j]
            if np.isfinite(a) and np.isfinite(b) and (a <= 0) != (b <= 0):
                edge_ids.append(("v", i, j))
                za.append(Z[i, j]), zb.append(Z[i + 1, j])
                ha.append(a), hb.append(b)
    if not edge_ids:
        return [], np.array([]), np.array([])
    za, zb = np.array(za), np.array(zb)
    ha, hb = np.array(ha), np.array(hb)
    if refine:
        pts, res = _refine_crossings(data, za, zb, ha, hb, refine_tol)
    else:
        pts, res = (za + zb) / 2.0, np.abs((ha + hb) / 2.0)
    crossings = {e: k for k, e in enumerate(edge_ids)}
    segs = _march_cells(h, crossings, nodes_x, nodes_y,
                        lambda zs: _log_abs_g(data, zs))
    return _walk_curves(segs, crossings, pts), pts, res


def _annotate(points: np.ndarray, closed: bool, prediction,
              slack: float = 0.0) -> tuple:
    if isinstance(prediction, EndReport):
        prediction = prediction.accumulation
    if closed and len(points) >= 8:
        # algebraic circle fit: |z|^2 = 2 cx x + 2 cy y + (r^2 - |c|^2);
        # a vertex-centroid estimate would inherit the uneven vertex
        # spacing of the marching grid
        x, y = points.real, points.imag
        A = np.column_stack([2 * x, 2 * y, np.ones_like(x)])
        (cx, cy, t), *_ = np.linalg.lstsq(A, x * x + y * y, rcond=None)
        rr = t + cx * cx + cy * cy
        if rr > 0:
            r = math.sqrt(rr)
            radii = np.hypot(x - cx, y - cy)
            if float(np.sqrt(np.mean((radii - r) ** 2))) < 1e-3 * r:
                return ("circle", r)
    if not closed and len(points) >= 8:
        theta = np.unwrap(np.angle(points))
        if float(theta.max() - theta.min()) > 0.5:
            lr = np.log(np.abs(points))
            A = np.vstack([np.ones_like(theta), theta]).T
            (a, b), *_ = np.linalg.lstsq(A, lr, rcond=None)
            rms = float(np.sqrt(np.mean((lr - a - b * theta) ** 2)))
            if rms < 1e-3 * max(1.0, abs(b) *
                                float(theta.max() - theta.min())):
                return ("spiral", float(b))
    if isinstance(prediction, Sectors) and prediction.count > 0:
        m, delta = prediction.count, prediction.offset
        width = math.pi / m
        r = np.abs(points)
        keep = r > 2.0 * slack
        if np.any(keep):
            theta = np.angle(points[keep])
            dev = np.abs((theta - delta + width / 2) % width - width / 2)
            # refined vertices sit within ~slack of the true curve, so
            # at radius r the angle carries that much uncertainty
            dev = np.maximum(dev - np.arctan2(slack, r[keep]), 0.0)
            eps = float(dev.max())
            if eps < width / 2:
                return ("sector-contained", m, delta, eps)
    return ("generic",)


def trace_singular_set(
    data: SurfaceData,
    window,
    resolution: int = 96,
    prediction=None,
    refine_tol: float = 1e-8,
) -> list[SingularCurve]:
    """Trace {|g| = 1} over ``window`` = (x0, x1, y0, y1).

    Marching squares on log|g| with per-edge bisection refinement;
    curve topology is cross-checked at twice the resolution and a
    mismatch raises ValueError (the window needs a finer grid).  Curves
    come back ordered by distance from the origin and annotated against
    ``prediction`` (an EndReport or its accumulation field).
    """
    curves, pts, res = _trace_topology(data, window, resolution,
                                       refine_tol)
    check, pts2, _ = _trace_topology(data, window, 2 * resolution,
                                     refine_tol, refine=False)
    # every component the coarse grid resolves must persist at twice
    # the resolution with the same closedness and comparable geometry;
    # extra components appearing only at the finer level are fine (an
    # accumulating singular set grows new ones at every refinement)
    x0, x1, y0, y1 = window
    cell = max(x1 - x0, y1 - y0) / resolution

    def summary(chain, source):
        p = source[np.array(chain, dtype=int)]
        diam = math.hypot(p.real.max() - p.real.min(),
                          p.imag.max() - p.imag.min())
        return complex(p.mean()), diam

    fine = [(closed, *summary(ch, pts2)) for ch, closed in check]
    kept = []
    for chain, closed in curves:
        centroid, diam = summary(chain, pts)
        if diam < 6.0 * cell:
            continue  # below the detection scale of this resolution
        tol = 0.35 * diam + cell
        if not any(cl == closed and abs(c2 - centroid) <= tol and
                   0.6 <= d2 / diam <= 1.6
                   for cl, c2, d2 in fine):
            raise ValueError(
                "resolution too coarse: singular component near "
                f"{centroid:.4f} (diameter {diam:.4f}) does not "
                "persist at twice the resolution")
        kept.append((chain, closed))
    curves = kept

    out = []
    for chain, closed in curves:
        p = pts[np.array(chain, dtype=int)]
        worst = float(res[np.array(chain, dtype=int)].max())
        out.append(SingularCurve(p, closed,
                                 _annotate(p, closed, prediction,
                                           slack=0.25 * cell),
                                 worst))
    out.sort(key=lambda c: (float(np.abs(c.points).mean()),
                            float(np.angle(c.points.mean()
                                           if c.points.mean() != 0
                                           else 1.0))))
    return out


def ray_crossings(curves, angle: float = 0.0, r_range=None) -> list[float]:
    """Radii at which the traced curves cross the ray arg z = angle."""
    rot = cmath.exp(-1j * angle)
    radii = []
    for curve in curves:
        pts = curve.points * rot
        seq = np.concatenate([pts, pts[:1]]) if curve.closed else pts
        for a, b in zip(seq[:-1], seq[1:]):
            if a.imag == 0.0 and a.real > 0:
                radii.append(a.real)
                continue
            if (a.imag <= 0) == (b.imag <= 0) or a.imag == b.imag:
                continue
            t = -a.imag / (b.imag - a.imag)
            x = a.real + t * (b.real - a.real)
            if x > 0:
                # interpolate |z| between the (refined, on-curve)
                # vertices rather than taking |interpolated z|: a chord
                # cuts inside a curved arc
                radii.append(float(abs(a) + t * (abs(b) - abs(a))))
    radii.sort()
    dedup = []
    for r in radii:
        if not dedup or abs(r - dedup[-1]) > 1e-6 * max(1.0, r):
            dedup.append(r)
    if r_range is not None:
        dedup = [r for r in dedup if r_range[0] <= r < r_range[1]]
    return dedup


# ---------------------------------------------------------------------------
# plot and table export


def export_singular_svg(curves, path: str, window, sectors=None,
                        sector_eps: float = 0.2, size: int = 640):
    """Singular curves as SVG polylines over ``window``; optional
    Sectors prediction drawn as shaded wedges from the origin."""
    x0, x1, y0, y1 = window
    span = max(x1 - x0, y1 - y0)
    scale = size / span

    def to_px(z):
        return ((z.real - x0) * scale, (y1 - z.imag) * scale)

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    if sectors is not None and isinstance(sectors, Sectors) \
            and sectors.count > 0:
        m, delta = sectors.count, sectors.offset
        reach = 2.0 * span
        for k in range(2 * m):
            mid = delta + k * math.pi / m
            a0, a1 = mid - sector_eps, mid + sector_eps
            p0 = to_px(cmath.rect(reach, a0))
            p1 = to_px(cmath.rect(reach, a1))
            o = to_px(0.0)
            lines.append(
                f'<path d="M {o[0]:.2f} {o[1]:.2f} '
                f'L {p0[0]:.2f} {p0[1]:.2f} L {p1[0]:.2f} {p1[1]:.2f} Z" '
                f'fill="#f5c66a" fill-opacity="0.45" stroke="none"/>')
    for curve in curves:
        pts = curve.points
        if curve.closed:
            pts = np.concatenate([pts, pts[:1]])
        coords = " ".join(f"{x:.2f},{y:.2f}"
                          for x, y in (to_px(z) for z in pts))
        lines.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="black" stroke-width="2"/>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def export_samples_csv(samples, path: str):
    """Flat CSV of a sample grid (one row per point)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["re_z", "im_z", "x0", "x1", "x2", "x3",
                     "ds2", "dshat2", "dsigma2", "dsharp2", "sing"])
        rows = samples if samples and isinstance(samples[0], list) \
            else [samples]
        for row in rows:
            for s in row:
                p = s.position
                wr.writerow([s.point.real, s.point.imag,
                             p.x0, p.x1, p.x2, p.x3,
                             s.ds2, s.dshat2, s.dsigma2,
                             "" if s.dsharp2 is None else s.dsharp2,
                             s.sing])
