import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from rayleigh_jost.analysis import (CountReport, fit_ray, forbidden_domain_check, gamma_bound,
                                    gamma_max_formula, growth_fit, levinson_counts, log_abs_F,
                                    script_A, script_AP, script_AS, zeta_P, zeta_PS)
from rayleigh_jost.medium import HalfSpaceConstants, PotentialSpec, TransformData
from rayleigh_jost.riemann import ALL_SHEETS, PHYSICAL, SheetTag, SpectralPoint, quasi_momenta
from rayleigh_jost.spectral import ResonanceRecord

C = HalfSpaceConstants(1.0, 1.0, 1.0, 1.0)
TD = TransformData(C)


def const_potential(M):
    M = np.asarray(M, float)
    return PotentialSpec(lambda x: np.where((np.asarray(x) <= 1.0)[..., None, None], M, 0.0)
                         * np.ones(np.shape(x) + (2, 2)), 1.0)


def test_gamma_examples():
    assert gamma_bound(SpectralPoint(1.3 + 0.4j), C) == 0.0
    assert gamma_bound(SpectralPoint(2.0, SheetTag(-1, -1)), C) == pytest.approx(3.8297084310253524)


@settings(max_examples=400)
@given(st.floats(-5, 5), st.floats(-5, 5), st.sampled_from(ALL_SHEETS))
def test_gamma_equals_max_formula(x, y, s):
    assume(abs(x) > 1e-6 and abs(y) > 1e-6)
    p = SpectralPoint(complex(x, y), s)
    q = quasi_momenta(p, C)
    assert gamma_bound(p, C) == gamma_max_formula(q)
    assert zeta_P(q) >= 0 and zeta_PS(q) >= 0
    assert (zeta_PS(q) == 0) == (s.sign_P < 0)


def test_script_A_zero_and_constant():
    assert script_A(3.0, PotentialSpec.bump(1.0, 0.5, [[1, 0], [0, 1]]), TD) == 0
    v, xi = 0.7, 4.0
    got = script_A(xi, const_potential([[0, v], [0, 0]]), TD)
    assert got == pytest.approx(2 * v * (np.exp(2 * xi) - 1) / (2 * xi), rel=1e-12)


@pytest.mark.parametrize("xi", [2.0, 10.0, 25.0])
def test_script_A_polynomial_antiderivative(xi):
    # bump from 0.5: V12 = 4 (y - 0.5)(1 - y) / 0.25 * m on [0.5, 1]
    m = 0.5
    V = PotentialSpec.bump(1.0, 0.5, [[0, m], [0, 0]])
    a, b = 0.5, 1.0
    k = 2 * xi
    # closed form of int_a^b e^{k y} (y - a)(b - y) dy
    F = lambda y: np.exp(k * y) * (-(y * y) / k + ((a + b) / k + 2 / k**2) * y
                                   - a * b / k - (a + b) / k**2 - 2 / k**3)
    exact = 2 * m * 16 * (F(b) - F(a))
    assert script_A(xi, V, TD) == pytest.approx(exact, rel=1e-10)


def test_script_AP_AS_structure():
    V = const_potential([[0.3, 0.0], [0.0, 0.0]])
    xi = 3.0
    I = (np.exp(2 * xi) - 1) / (2 * xi)
    assert script_AP(xi, V, TD) == pytest.approx(2 * 0.3 * I, rel=1e-12)
    # G^H = I: a = V11, b = V21 = 0, G21(0) = c_I H / 2 = 1/3
    assert script_AS(xi, V, TD) == pytest.approx(-(1 / 3) * 0.3 * I, rel=1e-12)


def test_log_abs_F_matches_direct(homogeneous_model, bump_model):
    for m in (homogeneous_model, bump_model):
        for xi in (0.8 + 0.4j, 3.0, 2.0 + 5.0j):
            direct = np.log(abs(m.F(xi)[0]))
            assert abs(log_abs_F(m, xi) - direct) <= 1e-8


def test_fit_ray_recovers_synthetic_type():
    r = np.linspace(15, 50, 8)
    lf = 2.0 + 12 * np.log(r) + 6.0 * r
    f = fit_ray(r, lf, 0.0, 1.0)
    assert f.slope == pytest.approx(6.0) and f.exponent == pytest.approx(12.0)
    assert f.pass_8H and f.windows_agree
    f = fit_ray(r, 1.0 + 10.0 * r, 0.0, 1.0)
    assert not f.pass_8H and f.pass_12H


def test_radius_guard(homogeneous_model):
    with pytest.raises(ValueError, match="smaller radii"):
        growth_fit(homogeneous_model, [0.0], [10, 20, 40, 60])


def test_homogeneous_growth(homogeneous_model):
    rep = growth_fit(homogeneous_model, [0.0, np.pi / 2], np.linspace(15, 50, 8))
    assert rep.passed
    assert rep.rays[1].exponent == pytest.approx(12.0, abs=0.5)


def test_counts_empty():
    rep = levinson_counts([], [1, 2, 3])
    assert rep.n_plus == [0, 0, 0] and rep.n_minus == [0, 0, 0] and rep.monotone


@settings(max_examples=50)
@given(st.lists(st.complex_numbers(max_magnitude=20), max_size=40))
def test_counts_monotone(zs):
    rep = levinson_counts(zs, [1, 5, 10, 15, 20])
    assert rep.monotone
    assert rep.n_plus[-1] + rep.n_minus[-1] + rep.n_axis[-1] == sum(abs(z) <= 20 for z in zs)


def test_counts_convention_and_multiplicity():
    recs = [ResonanceRecord(1 + 1j, "all", 2, 0.0), ResonanceRecord(-1 + 1j, "all", 1, 0.0),
            ResonanceRecord(3j, "all", 1, 0.0)]
    rep = levinson_counts(recs, [2, 4], winding_total=4)
    assert rep.n_plus == [2, 2] and rep.n_minus == [1, 1] and rep.n_axis == [0, 1]
    assert rep.complete
    assert rep.sector_exceptions[0.1] == [3, 3]


def test_forbidden_real_axis_and_equality():
    real = [1.0, 2.0, 3.5, 5.0, 8.0]
    rep = forbidden_domain_check(real)
    assert rep.passed and rep.spread_ok
    eq = [x + 1j * np.sqrt(np.exp(4 * x) - x * x) for x in (0.5, 1.0, 2.0, 3.0)]
    assert forbidden_domain_check(eq).C_fit == pytest.approx(1.0)


@given(st.lists(st.complex_numbers(max_magnitude=30), min_size=1, max_size=30))
def test_forbidden_bound_holds_for_fit(zs):
    rep = forbidden_domain_check(zs)
    for z in zs:
        assert abs(z) <= rep.C_fit * np.exp(2 * abs(z.real)) * (1 + 1e-12) + 1e-300


def test_forbidden_flags_outlier():
    zs = [0.5 + 0.5j, 1.0 + 1j, 2.0 + 2j, 3.0 + 1j, 4.0 + 1e6j]
    rep = forbidden_domain_check(zs)
    assert [z for z, _ in rep.violations] == [4.0 + 1e6j]
