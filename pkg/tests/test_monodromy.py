import math

import numpy as np
import pytest

from dsface.algebra import INF
from dsface.expr import VAR_Z, const, mul, parse, power
from dsface.frames import SurfaceData
from dsface.monodromy import (
    completeness_probe,
    EveryRay,
    Sectors,
    end_classify,
    indicial_data,
    loop_monodromy,
)
from dsface.su11 import Elliptic, Hyperbolic, Parabolic


def catenoid_data(mu):
    # same normalization as in test_frames: omega = Q / dg for G = z
    g = power(VAR_Z, mu)
    w = mul(const((1 - mu * mu) / (4 * mu)), power(VAR_Z, -mu - 1))
    return SurfaceData.from_secondary(g, w)


def parabolic_catenoid_lift():
    c = "(i/(2*2^(1/2)))"
    return SurfaceData.from_lift((
        parse(f"{c} * z^(1/2) * (3 - log(z))"),
        parse(f"{c} * z^(1/2) * (-1 + log(z))"),
        parse(f"{c} * z^(-1/2) * (1 + log(z))"),
        parse(f"{c} * z^(-1/2) * (-3 - log(z))"),
    ))


def parabolic_catenoid_secondary():
    return SurfaceData.from_secondary(
        parse("(log(z) + 1) / (log(z) - 1)"),
        parse("-(log(z) - 1)^2 / (8*z)"))


def integral_elliptic_data():
    # g touches the unit circle at the puncture, so the singular set
    # accumulates there in 2*3 sectors
    return SurfaceData.from_gauss_pair(parse("z"), parse("1 - z^3"))


def trinoid_data(shifted=True):
    raw = "((2*z - 1) / (2*z*(z - 1)) - log(z/(z - 1)))"
    if shifted:
        # the Cayley-type shift below moves the translation monodromy of
        # the log into SU(1,1); the unshifted representative does not
        # descend even though it induces the same Hopf differential
        g = parse(f"({raw} - 1) / ({raw} + 1)")
    else:
        g = parse(raw)
    return SurfaceData.from_gauss_pair(parse("z"), g)


def fournoid_data():
    return SurfaceData.from_gauss_pair(
        parse("3*(z^3 + 2) / (4 - z)"),
        parse("-(z^3 - 12*z^2 + 2) / (3*z)"))


FOURNOID_PUNCTURES = [complex(r) for r in np.roots([1.0, -6.0, 0.0, -1.0])]


def circle_end_data():
    # secondary Gauss map driven by the core z^(10i); every ray into the
    # puncture crosses the singular set infinitely often
    g = parse("(z^(10*i) - i) / (z^(10*i) + i)")
    w = parse("-(z^(10*i) + i)^2 * z^(1 - 10*i) / 20")
    return SurfaceData.from_secondary(g, w)


def spiral_end_data():
    g = parse("(z^(1 + 10*i) - i) / (z^(1 + 10*i) + i)")
    w = parse("-i * (z^(1 + 10*i) + i)^2 * z^(-10*i) / (2*(1 + 10*i))")
    return SurfaceData.from_secondary(g, w)


def psu_distance(A, B):
    return min(float(np.abs(A - B).max()), float(np.abs(A + B).max()))


# ---------------------------------------------------------------------------
# loop monodromy: routes and factors


def test_catenoid_symbolic_factor_is_exact_rotation():
    mono = loop_monodromy(catenoid_data(0.3), radius=0.5)
    assert mono.route == "symbolic"
    assert mono.descends
    expected = np.diag([np.exp(-0.3j * np.pi), np.exp(0.3j * np.pi)])
    assert np.abs(mono.normalized - expected).max() < 1e-12
    assert abs(np.trace(mono.normalized) - 2 * math.cos(0.3 * math.pi)) \
        < 1e-12


def test_catenoid_ode_route_matches_symbolic():
    data = catenoid_data(0.3)
    sym = loop_monodromy(data, radius=0.5, route="symbolic")
    ode = loop_monodromy(data, radius=0.5, route="ode")
    assert ode.route == "ode"
    assert ode.descends
    assert psu_distance(sym.normalized, ode.normalized) < 1e-8


def test_loop_radius_does_not_change_the_factor():
    data = catenoid_data(0.3)
    t1 = np.trace(loop_monodromy(data, radius=0.3).normalized)
    t2 = np.trace(loop_monodromy(data, radius=0.6,
                                 base_angle=1.1).normalized)
    assert abs(t1 - t2) < 1e-12


def test_single_valued_data_has_identity_monodromy():
    for g, w in [(parse("0*z"), parse("1")), (parse("z"), parse("1"))]:
        mono = loop_monodromy(SurfaceData.from_secondary(g, w), radius=0.5)
        assert mono.route == "symbolic"
        assert mono.descends
        assert np.abs(mono.normalized - np.eye(2)).max() < 1e-14
        assert mono.check_residual < 1e-12


def test_multivalued_omega_with_plain_g_does_not_descend():
    # the claimed factor for g = z is the identity, but omega = sqrt(z)
    # flips sign around the loop; the transformation check must catch it
    mono = loop_monodromy(
        SurfaceData.from_secondary(parse("z"), parse("z^0.5")), radius=0.5)
    assert mono.route == "symbolic"
    assert not mono.descends
    assert mono.check_residual > 0.5


def test_route_validation():
    data = catenoid_data(0.3)
    with pytest.raises(ValueError, match="unknown route"):
        loop_monodromy(data, route="bogus")
    with pytest.raises(ValueError, match="no closed-form lift"):
        loop_monodromy(data, route="closed-form")


def test_symbolic_route_needs_a_single_core():
    data = SurfaceData.from_secondary(
        parse("z^0.5 + z^(1/3)"), parse("1"))
    with pytest.raises(ArithmeticError, match="single multivalued core"):
        loop_monodromy(data, radius=0.5, route="symbolic")


def test_parabolic_catenoid_factor_from_lift():
    mono = loop_monodromy(parabolic_catenoid_lift(), radius=0.5)
    assert mono.route == "closed-form"
    assert mono.descends
    expected = np.array([[1 - 1j * np.pi, 1j * np.pi],
                         [-1j * np.pi, 1 + 1j * np.pi]])
    assert psu_distance(mono.normalized, expected) < 1e-9
    assert abs(np.trace(mono.normalized) - 2.0) < 1e-12


def test_parabolic_catenoid_secondary_data_agrees_with_lift():
    from_lift = loop_monodromy(parabolic_catenoid_lift(), radius=0.5)
    from_g = loop_monodromy(parabolic_catenoid_secondary(), radius=0.5)
    assert from_g.route == "symbolic"
    assert from_g.descends
    assert psu_distance(from_lift.normalized, from_g.normalized) < 1e-12


def test_unshifted_trinoid_gauss_map_does_not_descend():
    mono = loop_monodromy(trinoid_data(shifted=False).localized(0.0),
                          radius=0.5)
    assert not mono.descends
    assert mono.form_residual > 0.5


def test_strongly_hyperbolic_trace_circle_end():
    mono = loop_monodromy(circle_end_data(),
                          radius=float(np.exp(-np.pi / 10)))
    assert mono.route == "symbolic"
    assert mono.descends
    tr = np.trace(mono.normalized)
    expected = 2 * math.cosh(10 * math.pi)
    assert abs(tr.real - expected) < 1e-10 * expected
    assert abs(tr.imag) < 1e-12 * expected
    assert mono.check_residual < 1e-6


def test_strongly_hyperbolic_trace_spiral_end():
    mono = loop_monodromy(spiral_end_data(), radius=0.55)
    assert mono.route == "symbolic"
    assert mono.descends
    tr = np.trace(mono.normalized)
    expected = 2 * math.cosh(10 * math.pi)
    assert abs(abs(tr.real) - expected) < 1e-10 * expected


# ---------------------------------------------------------------------------
# indicial data


def test_catenoid_indicial_roots():
    ind = indicial_data(catenoid_data(0.3), 0.0)
    assert abs(ind.alpha - 0.455) < 1e-9
    r = sorted(ind.roots, key=lambda x: x.real)
    assert abs(r[0] - 0.35) < 1e-8
    assert abs(r[1] - 0.65) < 1e-8
    assert not ind.resonant


def test_double_root_is_resonant():
    ind = indicial_data(parabolic_catenoid_secondary(), 0.0)
    assert abs(ind.alpha - 0.5) < 1e-9
    assert abs(ind.roots[0] - 0.5) < 1e-6
    assert abs(ind.roots[1] - 0.5) < 1e-6
    assert ind.resonant


def test_integer_root_gap_is_resonant():
    ind = indicial_data(integral_elliptic_data(), 0.0)
    assert abs(ind.alpha + 4.0) < 1e-6
    r = sorted(ind.roots, key=lambda x: x.real)
    assert abs(r[0] + 1.0) < 1e-6
    assert abs(r[1] - 2.0) < 1e-6
    assert ind.resonant


def test_complex_indicial_roots_circle_end():
    ind = indicial_data(circle_end_data(), 0.0)
    assert abs(ind.alpha - 50.5) < 1e-9
    r = sorted(ind.roots, key=lambda x: x.imag)
    assert abs(r[0] - (0.5 - 5j)) < 1e-8
    assert abs(r[1] - (0.5 + 5j)) < 1e-8
    assert not ind.resonant


def test_complex_indicial_roots_spiral_end():
    ind = indicial_data(spiral_end_data(), 0.0)
    assert abs(ind.alpha - (50.0 - 10.0j)) < 1e-9
    r = sorted(ind.roots, key=lambda x: x.real)
    assert abs(r[0] - (-5j)) < 1e-8
    assert abs(r[1] - (1 + 5j)) < 1e-8
    assert not ind.resonant


# ---------------------------------------------------------------------------
# end classification


def test_catenoid_end_is_elliptic():
    rep = end_classify(catenoid_data(0.3), 0.0)
    assert rep.kind == "elliptic"
    assert isinstance(rep.conjugacy, Elliptic)
    assert abs(rep.mu - 0.3) < 1e-9
    assert rep.epsilon == -1
    assert rep.ord_q == -2
    assert rep.g_regular
    assert rep.accumulation is None


def test_elliptic_parameter_is_reported_mod_one():
    rep = end_classify(catenoid_data(1.3), 0.0)
    assert rep.kind == "elliptic"
    assert abs(rep.mu - 0.3) < 1e-9
    assert abs(rep.indicial.alpha + 0.345) < 1e-9


def test_parabolic_catenoid_end_is_first_kind():
    rep = end_classify(parabolic_catenoid_lift(), 0.0)
    assert rep.kind == "parabolic-first-kind"
    assert rep.conjugacy == Parabolic(sign_outer=1, sign_t=-1)
    assert rep.mu is None
    assert rep.epsilon == -1
    assert rep.ord_q == -2
    assert rep.ramification == 1
    assert rep.accumulation is None
    assert rep.indicial.resonant


def test_integral_elliptic_end_with_sector_accumulation():
    rep = end_classify(integral_elliptic_data(), 0.0)
    assert rep.kind == "elliptic-integral"
    assert rep.mu == 0.0
    assert rep.epsilon is None
    assert rep.ord_q == -2
    assert rep.ramification == 1
    acc = rep.accumulation
    assert isinstance(acc, Sectors)
    assert acc.count == 3
    assert abs(acc.offset - math.pi / 6) < 1e-6


def test_trinoid_finite_ends_are_second_kind():
    data = trinoid_data()
    expected_sign_t = {0.0: -1, 1.0: 1}
    for p, sign_t in expected_sign_t.items():
        rep = end_classify(data, p)
        assert rep.kind == "parabolic-second-kind", p
        assert rep.conjugacy == Parabolic(sign_outer=1, sign_t=sign_t), p
        assert rep.ord_q == -1, p
        assert rep.ramification == 1, p
        acc = rep.accumulation
        assert isinstance(acc, Sectors), p
        assert acc.count == 1, p
        assert abs(acc.offset - math.pi / 2) < 1e-6, p
        assert rep.indicial.resonant, p


def test_trinoid_end_at_infinity_is_integral_elliptic():
    rep = end_classify(trinoid_data(), INF)
    assert rep.kind == "elliptic-integral"
    assert rep.ord_q == -2
    assert rep.ramification == 1
    assert abs(rep.indicial.alpha + 4.0) < 1e-6
    assert rep.indicial.resonant
    acc = rep.accumulation
    assert isinstance(acc, Sectors)
    assert acc.count == 3
    assert abs(acc.offset - math.pi / 6) < 1e-6


def test_classification_refuses_non_descending_data():
    with pytest.raises(ValueError, match="does not descend"):
        end_classify(trinoid_data(shifted=False), 0.0)


def test_fournoid_ends_are_integral_elliptic_with_trivial_monodromy():
    data = fournoid_data()
    for p in FOURNOID_PUNCTURES + [INF]:
        radius = 0.05 if p is INF else 0.2
        rep = end_classify(data, p, loop_radius=radius)
        mono = rep.monodromy
        assert np.abs(mono.normalized - np.eye(2)).max() < 1e-10, p
        assert rep.kind == "elliptic-integral", p
        assert rep.epsilon == 1, p
        assert rep.ord_q == -1, p
        assert rep.ramification == 2, p
        assert rep.accumulation is None, p
        assert abs(rep.indicial.alpha + 1.5) < 1e-9, p
        r = sorted(rep.indicial.roots, key=lambda x: x.real)
        assert abs(r[0] + 0.5) < 1e-8, p
        assert abs(r[1] - 1.5) < 1e-8, p
        assert rep.indicial.resonant, p


def test_circle_end_is_hyperbolic():
    rep = end_classify(circle_end_data(), 0.0,
                       loop_radius=float(np.exp(-np.pi / 10)))
    assert rep.kind == "hyperbolic"
    assert isinstance(rep.conjugacy, Hyperbolic)
    assert abs(rep.mu - 10.0) < 1e-9
    assert rep.ord_q == 0
    assert rep.accumulation == EveryRay()


def test_spiral_end_is_hyperbolic():
    rep = end_classify(spiral_end_data(), 0.0, loop_radius=0.55)
    assert rep.kind == "hyperbolic"
    assert abs(rep.mu - 10.0) < 1e-9
    assert rep.accumulation == EveryRay()


def test_end_report_is_stable_under_loop_choice():
    data = catenoid_data(0.3)
    a = end_classify(data, 0.0, loop_radius=0.3)
    b = end_classify(data, 0.0, loop_radius=0.6, base_angle=1.1)
    assert a.kind == b.kind == "elliptic"
    assert abs(a.mu - b.mu) < 1e-9


# ---------------------------------------------------------------------------
# completeness probe


def test_parabolic_catenoid_end_is_complete():
    rep = completeness_probe(parabolic_catenoid_lift(), 0.0)
    assert rep.verdict == "complete"
    assert rep.singular_set_compact is True
    assert all(v == "diverging" for v in rep.ray_verdicts)
    # the lift metric grows like dr/(4 r^2): the threshold branch fires
    assert min(rep.ray_lengths) > 1e3


def test_trinoid_ends_are_only_weakly_complete():
    data = trinoid_data()
    for p in (0.0, 1.0):
        rep = completeness_probe(data, p)
        assert rep.verdict == "weakly-complete", p
        assert rep.singular_set_compact is False, p
        assert all(v == "diverging" for v in rep.ray_verdicts), p


def test_trinoid_divergence_is_logarithmic():
    # |Q| ~ 2/r at the end z = 0, so each dyadic piece contributes
    # 2 log 2 and the total stays far below any threshold: divergence
    # must be detected from the non-decaying tail, not from the length
    rep = completeness_probe(trinoid_data(), 0.0)
    expected = 20 * 2 * math.log(2)
    for length in rep.ray_lengths:
        assert abs(length - expected) < 0.05 * expected


def test_fournoid_ends_are_complete():
    data = fournoid_data()
    for p in FOURNOID_PUNCTURES + [INF]:
        rep = completeness_probe(data, p,
                                 start_radius=0.05 if p is INF else 0.1)
        assert rep.verdict == "complete", p
        assert rep.singular_set_compact is True, p


def test_accumulating_singular_set_blocks_completeness():
    rep = completeness_probe(integral_elliptic_data(), 0.0)
    assert rep.verdict == "weakly-complete"
    assert rep.singular_set_compact is False
    assert all(v == "diverging" for v in rep.ray_verdicts)


def test_regular_point_has_finite_rays():
    rep = completeness_probe(integral_elliptic_data(), 0.5,
                             start_radius=0.05)
    assert rep.verdict == "not-complete"
    assert all(v == "finite" for v in rep.ray_verdicts)
    assert max(rep.ray_lengths) < 10


def test_horosphere_is_complete_by_definition():
    rep = completeness_probe(parabolic_catenoid_lift(), 0.0,
                             horosphere=True)
    assert rep.verdict == "complete-by-definition"
    assert rep.singular_set_compact is True
    assert rep.ray_verdicts == ()


def test_probe_needs_the_hyperbolic_gauss_map():
    with pytest.raises(ValueError, match="hyperbolic Gauss"):
        completeness_probe(catenoid_data(0.3), 0.0)
