import math

import numpy as np
import pytest

import dsface.algebra as alg
from dsface.algebra import MinkowskiVec, minkowski_product
from dsface.expr import eval_principal, parse
from dsface.frames import SurfaceData, integrate_frame
from dsface.monodromy import Sectors, end_classify
from dsface.surface import (
    DomainGrid,
    SurfaceSample,
    annulus_grid,
    export_mesh,
    export_samples_csv,
    export_singular_svg,
    gauss_maps_at,
    lightcone_projection,
    metrics_at,
    normal_vector,
    project_to_s31,
    ray_crossings,
    rectangle_grid,
    sample_at,
    sample_grid,
    stereographic,
    trace_singular_set,
)

PC_ENTRIES = None


def pc_lift():
    global PC_ENTRIES
    if PC_ENTRIES is None:
        c = "(i/(2*2^(1/2)))"
        PC_ENTRIES = (
            parse(f"{c} * z^(1/2) * (3 - log(z))"),
            parse(f"{c} * z^(1/2) * (-1 + log(z))"),
            parse(f"{c} * z^(-1/2) * (1 + log(z))"),
            parse(f"{c} * z^(-1/2) * (-3 - log(z))"),
        )
    return SurfaceData.from_lift(PC_ENTRIES)


def catenoid(mu=0.3):
    g = parse(f"z^({mu})")
    w = parse(f"{(1 - mu * mu) / (4 * mu)} * z^({-mu - 1})")
    return SurfaceData.from_secondary(g, w)


def trinoid():
    raw = "((2*z - 1) / (2*z*(z - 1)) - log(z/(z - 1)))"
    return SurfaceData.from_gauss_pair(parse("z"),
                                      parse(f"({raw} - 1) / ({raw} + 1)"))


def m3_face():
    return SurfaceData.from_gauss_pair(parse("z"), parse("1 - z^3"))


def circle_end():
    return SurfaceData.from_secondary(
        parse("(z^(10*i) - i) / (z^(10*i) + i)"),
        parse("-(z^(10*i) + i)^2 * z^(1 - 10*i) / 20"))


def spiral_end():
    return SurfaceData.from_secondary(
        parse("(z^(1 + 10*i) - i) / (z^(1 + 10*i) + i)"),
        parse("-i * (z^(1 + 10*i) + i)^2 * z^(-10*i) / (2*(1 + 10*i))"))


def pc_frame_at(z):
    e = PC_ENTRIES
    return np.array([[eval_principal(e[0], z), eval_principal(e[1], z)],
                     [eval_principal(e[2], z), eval_principal(e[3], z)]])


# ---------------------------------------------------------------------------
# projection and pointwise vectors


def test_projection_lands_on_unit_sphere():
    rng = np.random.default_rng(11)
    for _ in range(20):
        A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        F = A / np.sqrt(np.linalg.det(A))
        v = project_to_s31(F)
        assert abs(minkowski_product(v, v) - 1.0) < 1e-10


def test_projection_rejects_determinant_drift():
    with pytest.raises(ValueError, match="determinant"):
        project_to_s31(np.diag([1.1, 1.0]))
    # and accepts within tolerance
    project_to_s31(np.diag([1.0 + 5e-9, 1.0]), tol=1e-6)


def test_left_translation_is_an_isometry_of_the_image():
    pc_lift()
    t = 0.4
    B = np.array([[math.cosh(t), math.sinh(t)],
                  [math.sinh(t), math.cosh(t)]], dtype=complex)
    for z in (0.5, 0.4 + 0.2j, 0.7 - 0.3j):
        F = pc_frame_at(z)
        lhs = project_to_s31(B @ F).as_array()
        X = B @ alg.mink_to_herm(project_to_s31(F)) @ B.conj().T
        rhs = alg.herm_to_mink((X + X.conj().T) / 2).as_array()
        assert np.abs(lhs - rhs).max() < 1e-12


def test_normal_is_unit_timelike_orthogonal_and_tangent_free():
    data = pc_lift()
    grid = annulus_grid(0.3, 0.9, 16, 16)
    samples = sample_grid(data, grid)
    for row in samples:
        for s in row:
            assert abs(minkowski_product(s.position, s.position) - 1) < 1e-10
            assert s.normal is not None
            assert abs(minkowski_product(s.normal, s.normal) + 1.0) < 1e-10
            assert abs(minkowski_product(s.normal, s.position)) < 1e-10
    # central differences of f stay Minkowski-orthogonal to nu
    h = 1e-3
    for z in (0.5, 0.45 + 0.2j, 0.7 - 0.1j):
        n = sample_at(data, z).normal
        for dz in (h, 1j * h):
            pa = sample_at(data, z - dz).position.as_array()
            pb = sample_at(data, z + dz).position.as_array()
            t = MinkowskiVec(*((pb - pa) / (2 * h)))
            scale = max(float(np.abs(pb - pa).max()) / (2 * h), 1.0)
            assert abs(minkowski_product(n, t)) < 1e-4 * scale


def test_normal_rejected_on_singular_set():
    with pytest.raises(ValueError, match="singular|\\|g\\| = 1"):
        normal_vector(np.eye(2), 1.0)
    gm = gauss_maps_at(catenoid(), cmath_exp := complex(math.cos(0.3),
                                                        math.sin(0.3)))
    assert abs(abs(cmath_exp) - 1.0) < 1e-12
    assert gm.lightcone is None and gm.component is None and gm.normal is None


def test_lightcone_projection_is_the_hyperbolic_gauss_map():
    cases = [
        (pc_lift(), [0.5, 0.4 + 0.2j, 0.7 - 0.3j], [-1, -1, -1]),
        (trinoid(), [0.3 + 0.4j, -0.6 + 0.2j, 2.0 + 1.0j], [-1, 1, 1]),
        (m3_face(), [0.8, 0.5 + 0.5j, -0.7 + 0.1j], [-1, 1, 1]),
    ]
    for data, pts, comps in cases:
        for z, comp in zip(pts, comps):
            gm = gauss_maps_at(data, z)
            assert gm.lightcone is not None
            assert abs(gm.lightcone - gm.hyperbolic) < 1e-10
            assert gm.component == comp
            assert (abs(gm.secondary) > 1.0) == (comp == 1)


def test_gauss_map_from_an_integrated_frame():
    data = catenoid()
    res = integrate_frame(data.secondary_gauss, data.omega,
                          [0.5, 0.8, 0.8 + 0.3j])
    gm = gauss_maps_at(data, 0.8 + 0.3j, frame=res.frame)
    assert abs(gm.lightcone - gm.hyperbolic) < 1e-10
    assert gm.component == -1


def test_stereographic_chart_fixed_value_and_domain():
    v = MinkowskiVec(math.sqrt(2.0), 0.0, 0.0, math.sqrt(3.0))
    X = stereographic(v)
    assert np.abs(X - [0.0, 0.0, math.sqrt(3) / (1 + math.sqrt(2))]).max() \
        < 1e-14
    assert 0.5 < X @ X < 1.0
    with pytest.raises(ValueError, match="x0 > 1"):
        stereographic(MinkowskiVec(1.0, 0.0, 0.0, 0.0))


def test_chart_images_stay_in_the_shell():
    data = pc_lift()
    for z in (0.03, 0.01, 0.02j, -0.015, 0.01 + 0.01j):
        s = sample_at(data, z)
        X = stereographic(s.position)
        assert 0.5 < X @ X < 1.0


def test_end_image_approaches_a_boundary_point():
    data = pc_lift()
    prev = math.inf
    for t in (0.02, 0.005, 0.001):
        X = stereographic(sample_at(data, t).position)
        d = float(np.linalg.norm(X - np.array([0.0, 0.0, -1.0])))
        assert d < prev
        prev = d
    assert prev < 5e-3


def test_lightcone_projection_chart_values():
    # [v] -> (x1 + i x2)/(x0 - x3), infinite on the x0 = x3 slice
    assert lightcone_projection(MinkowskiVec(2.0, 1.0, 1.0, 0.0)) \
        == pytest.approx(0.5 + 0.5j)
    assert not np.isfinite(
        lightcone_projection(MinkowskiVec(1.0, 1.0, 0.0, 1.0)).real)


# ---------------------------------------------------------------------------
# metrics


def test_pseudometric_induced_metric_product_identity():
    rng = np.random.default_rng(23)
    for data in (pc_lift(), catenoid(), trinoid()):
        for _ in range(10):
            z = 0.35 + 0.5 * rng.random() + (rng.random() - 0.5) * 0.4j
            m = metrics_at(data, z)
            rhs = 4.0 * abs(m.hopf) ** 2
            assert abs(m.dsigma2 * m.ds2 - rhs) <= 1e-12 * max(1.0, rhs)


def test_pseudometric_of_the_parabolic_catenoid():
    rng = np.random.default_rng(29)
    data = pc_lift()
    for _ in range(10):
        z = (0.35 + 0.5 * rng.random()) * np.exp(2j * np.pi * rng.random())
        m = metrics_at(data, z)
        ref = 1.0 / (abs(z) * math.log(abs(z))) ** 2
        assert abs(m.dsigma2 - ref) < 1e-12 * ref


def test_induced_metric_matches_finite_differences():
    data = pc_lift()
    h = 1e-4
    for z in (0.5, 0.45 + 0.2j, 0.7 - 0.1j):
        s0 = sample_at(data, z)
        for dz in (h, 1j * h):
            s1 = sample_at(data, z + dz)
            diff = MinkowskiVec(*(s1.position.as_array()
                                  - s0.position.as_array()))
            fd = minkowski_product(diff, diff) / h ** 2
            assert abs(fd - s0.ds2) < 5e-3 * s0.ds2


def test_metric_factors_at_an_explicit_point():
    # catenoid g = z^0.3, w = c z^-1.3 at z = 2: all four factors in
    # closed form (G = z for this normalization)
    mu, z = 0.3, 2.0
    cw = (1 - mu * mu) / (4 * mu)
    m = metrics_at(catenoid(mu), z)
    gg = z ** (2 * mu)
    ww = (cw * z ** (-mu - 1)) ** 2
    assert m.ds2 == pytest.approx((1 - gg) ** 2 * ww, rel=1e-12)
    assert m.dshat2 == pytest.approx((1 + gg) ** 2 * ww, rel=1e-12)
    dg = mu * z ** (mu - 1)
    assert m.dsigma2 == pytest.approx(4 * dg ** 2 / (1 - gg) ** 2, rel=1e-12)
    assert m.dsharp2 is None  # no hyperbolic Gauss map on this packaging
    assert m.hopf == pytest.approx(dg * cw * z ** (-mu - 1), rel=1e-12)


def test_lift_metric_against_the_gauss_pair_formula():
    data = m3_face()
    for z in (0.8, 0.5 + 0.5j, -0.7 + 0.1j):
        m = metrics_at(data, z)
        Gv = z  # hyperbolic Gauss map of this face
        qv = m.hopf
        ref = (1 + abs(Gv) ** 2) ** 2 * abs(qv) ** 2  # G' = 1
        assert m.dsharp2 == pytest.approx(ref, rel=1e-12)


def test_metrics_rejected_at_poles():
    with pytest.raises(ValueError, match="pole"):
        metrics_at(m3_face(), 0.0)


def test_induced_metric_degenerates_exactly_on_the_singular_set():
    cat = catenoid()
    curves = trace_singular_set(cat, window=(-1.5, 1.5, -1.5, 1.5),
                                resolution=96)
    assert len(curves) == 1
    curve = curves[0]
    assert curve.closed
    assert curve.annotation[0] == "circle"
    assert abs(curve.annotation[1] - 1.0) < 1e-6
    for z in curve.points[::16]:
        m = metrics_at(cat, z)
        assert m.ds2 < 1e-12
        assert m.dshat2 > 1.0
        assert m.dsigma2 > 1e12


# ---------------------------------------------------------------------------
# grids and branch-consistent sampling


def test_grid_constructors():
    g = rectangle_grid((-1.0, 1.0), (0.0, 0.5), 5, 3)
    assert g.points.shape == (3, 5)
    assert g.points[0, 0] == -1.0 + 0.0j
    assert g.points[2, 4] == 1.0 + 0.5j
    assert not g.wrap_columns
    a = annulus_grid(0.5, 1.0, 4, 8, wrap=True)
    assert a.points.shape == (4, 8)
    assert np.allclose(np.abs(a.points[0]), 0.5)
    assert np.allclose(np.abs(a.points[-1]), 1.0)
    assert a.wrap_columns


def test_grid_samples_are_on_one_branch_sheet():
    # the face rebuilt from (g, omega) by integration must agree with
    # the closed-form lift up to one left translation fixed at the
    # anchor; every grid point sharing it proves branch consistency
    lift_data = pc_lift()
    ode_data = SurfaceData.from_secondary(lift_data.secondary_gauss,
                                          lift_data.omega)
    grid = annulus_grid(0.3, 0.8, 8, 12, angle_range=(-2.0, 2.0))
    s_lift = sample_grid(lift_data, grid)
    s_ode = sample_grid(ode_data, grid)
    B = np.linalg.inv(pc_frame_at(grid.points[0, 0]))
    worst = 0.0
    for r in range(8):
        for c in range(12):
            X = B @ alg.mink_to_herm(s_lift[r][c].position) @ B.conj().T
            v = alg.herm_to_mink((X + X.conj().T) / 2, tol=1e-7)
            worst = max(worst, float(np.abs(
                v.as_array() - s_ode[r][c].position.as_array()).max()))
            assert abs(s_lift[r][c].ds2 - s_ode[r][c].ds2) < 1e-10
    assert worst < 1e-8


def test_grid_anchor_matches_principal_sample():
    data = pc_lift()
    grid = annulus_grid(0.3, 0.5, 3, 4, angle_range=(0.2, 1.2))
    samples = sample_grid(data, grid)
    direct = sample_at(data, grid.points[0, 0])
    assert np.abs(samples[0][0].position.as_array()
                  - direct.position.as_array()).max() < 1e-12
    assert samples[0][0].branch is not None


# ---------------------------------------------------------------------------
# mesh and table export


def test_obj_export_structure(tmp_path):
    data = pc_lift()
    grid = annulus_grid(0.01, 0.3, 10, 12)
    path = tmp_path / "face.obj"
    rep = export_mesh(data, grid, str(path))
    assert rep.vertex_count == 120
    assert rep.face_count == 198
    assert 0 < rep.unprojected_count < rep.vertex_count
    lines = path.read_text().splitlines()
    vs = [l for l in lines if l.startswith("v ")]
    fs = [l for l in lines if l.startswith("f ")]
    assert len(vs) == rep.vertex_count
    assert len(fs) == rep.face_count
    for line in fs:
        idx = [int(tok) for tok in line.split()[1:]]
        assert len(idx) == 3
        assert all(1 <= k <= rep.vertex_count for k in idx)
    gi = lines.index("g projected")
    gu = lines.index("g unprojected")
    n_proj = sum(1 for l in lines[gi:gu] if l.startswith("f "))
    assert 0 < n_proj < rep.face_count


def test_ply_export_structure(tmp_path):
    data = pc_lift()
    grid = annulus_grid(0.3, 0.6, 5, 7)
    path = tmp_path / "face.ply"
    rep = export_mesh(data, grid, str(path), fmt="ply")
    lines = path.read_text().splitlines()
    assert lines[0] == "ply"
    assert f"element vertex {rep.vertex_count}" in lines
    assert f"element face {rep.face_count}" in lines
    body = lines[lines.index("end_header") + 1:]
    assert len(body) == rep.vertex_count + rep.face_count
    assert all(len(l.split()) == 5 for l in body[:rep.vertex_count])
    assert all(l.startswith("3 ") for l in body[rep.vertex_count:])


def test_mesh_can_skip_cells_straddling_the_singular_set(tmp_path):
    cat = catenoid()
    grid = annulus_grid(0.8, 1.2, 16, 16, angle_range=(-0.8, 0.8))
    samples = sample_grid(cat, grid)
    sings = [s.sing for row in samples for s in row]
    assert min(sings) < 0.0 < max(sings)
    rep_all = export_mesh(cat, grid, str(tmp_path / "a.obj"),
                          samples=samples)
    rep_skip = export_mesh(cat, grid, str(tmp_path / "b.obj"),
                           skip_singular_cells=True, samples=samples)
    assert rep_all.skipped_cells == 0
    assert rep_skip.skipped_cells > 0
    assert rep_skip.face_count < rep_all.face_count


def test_wrapped_annulus_closes_the_seam(tmp_path):
    data = m3_face()
    n_t = 48
    span = (-math.pi, math.pi - 2 * math.pi / n_t)
    wrapped = export_mesh(
        data, annulus_grid(1.5, 2.0, 6, n_t, angle_range=span, wrap=True),
        str(tmp_path / "w.obj"))
    open_seam = export_mesh(
        data, annulus_grid(1.5, 2.0, 6, n_t, angle_range=span),
        str(tmp_path / "o.obj"))
    assert wrapped.face_count == 5 * n_t * 2
    assert open_seam.face_count == 5 * (n_t - 1) * 2


def test_mesh_error_paths(tmp_path):
    data = pc_lift()
    grid = annulus_grid(0.3, 0.5, 2, 2)
    with pytest.raises(ValueError, match="format"):
        export_mesh(data, grid, str(tmp_path / "x.stl"), fmt="stl")
    nan = math.nan
    bad = [[SurfaceSample(0j, MinkowskiVec(nan, nan, nan, nan), None,
                          nan, nan, nan, None, nan)]]
    with pytest.raises(ValueError, match="no valid vertices"):
        export_mesh(data, DomainGrid(np.array([[0.4 + 0j]])),
                    str(tmp_path / "x.obj"), samples=bad)


def test_csv_export(tmp_path):
    import csv

    data = pc_lift()
    samples = sample_grid(data, annulus_grid(0.3, 0.5, 3, 4))
    flat = [s for row in samples for s in row]
    path = tmp_path / "samples.csv"
    export_samples_csv(flat, str(path))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["re_z", "im_z", "x0", "x1", "x2", "x3",
                       "ds2", "dshat2", "dsigma2", "dsharp2", "sing"]
    assert len(rows) == 1 + len(flat)
    assert float(rows[1][0]) == pytest.approx(flat[0].point.real)
    assert float(rows[1][2]) == pytest.approx(flat[0].position.x0)


# ---------------------------------------------------------------------------
# singular set tracing


def test_concentric_circle_family():
    curves = trace_singular_set(circle_end(),
                                window=(-1.0, 1.0, -1.0, 1.0),
                                resolution=96)
    assert len(curves) == 9
    assert all(c.closed for c in curves)
    assert all(c.annotation[0] == "circle" for c in curves)
    assert all(c.residual < 1e-7 for c in curves)
    radii = sorted(c.annotation[1] for c in curves)
    expected = sorted(math.exp(-n * math.pi / 10) for n in range(9))
    assert max(abs(a - b) for a, b in zip(radii, expected)) < 1e-4


def test_circle_family_ray_crossings():
    curves = trace_singular_set(circle_end(),
                                window=(-1.0, 1.0, -1.0, 1.0),
                                resolution=96)
    hits = ray_crossings(curves, angle=0.2, r_range=(0.2, 0.99))
    expected = sorted(math.exp(-n * math.pi / 10) for n in range(1, 6))
    assert len(hits) == 5
    assert max(abs(a - b) for a, b in zip(hits, expected)) < 1e-6


def test_sectors_at_an_integral_elliptic_end():
    data = m3_face()
    report = end_classify(data, 0.0, loop_radius=0.25)
    assert isinstance(report.accumulation, Sectors)
    assert report.accumulation.count == 3
    assert report.accumulation.offset == pytest.approx(math.pi / 6)
    curves = trace_singular_set(data, window=(-0.45, 0.45, -0.45, 0.45),
                                resolution=96,
                                prediction=report.accumulation)
    assert len(curves) == 3
    for c in curves:
        assert not c.closed
        tag, m, delta, eps = c.annotation
        assert tag == "sector-contained"
        assert m == 3
        assert delta == pytest.approx(math.pi / 6)
        assert eps < 0.05
        # the traced set solves |g| = 1, i.e. |z|^6 = 2 Re z^3
        z = c.points
        assert float(np.max(np.abs(np.abs(z) ** 6 - 2 * (z ** 3).real))) \
            < 1e-6


def test_spiral_end_trace():
    curves = trace_singular_set(spiral_end(),
                                window=(-1.0, 1.0, -1.0, 1.0),
                                resolution=96)
    pitches = [c.annotation[1] for c in curves
               if c.annotation[0] == "spiral"]
    assert len(pitches) >= 2
    assert all(abs(b + 0.1) < 1e-3 for b in pitches)
    hits = ray_crossings(curves, angle=1.0, r_range=(0.2, 0.99))
    expected = sorted(math.exp((k * math.pi - 1) / 10)
                      for k in range(-4, 0 + 1))
    assert len(hits) == len(expected)
    assert max(abs(a - b) for a, b in zip(hits, expected)) < 1e-4


def test_singular_svg_export(tmp_path):
    data = m3_face()
    report = end_classify(data, 0.0, loop_radius=0.25)
    curves = trace_singular_set(data, window=(-0.45, 0.45, -0.45, 0.45),
                                resolution=96,
                                prediction=report.accumulation)
    path = tmp_path / "sing.svg"
    export_singular_svg(curves, str(path),
                        window=(-0.45, 0.45, -0.45, 0.45),
                        sectors=report.accumulation)
    text = path.read_text()
    assert text.count("<svg") == 1
    assert text.count("<polyline") == 3
    assert text.count("<path") == 6  # one wedge per accumulation ray
