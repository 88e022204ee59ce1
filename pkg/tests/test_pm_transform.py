import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rayleigh_jost.medium import ElasticProfile, HalfSpaceConstants, PotentialSpec, TransformData
from rayleigh_jost.pm_transform import (ThetaMatrix, TransformedModel, background_potential,
                                        bridge_boundary_matrix, green_kernel, green_kernel_dx,
                                        jost_function, kernel_A, kernel_B, kernel_C,
                                        unperturbed_jost_matrix)
from rayleigh_jost.rayleigh_ode import DisplacementModel
from rayleigh_jost.riemann import ALL_SHEETS, PHYSICAL, SheetTag, SpectralPoint, quasi_momenta
from conftest import make_transformed

C = HalfSpaceConstants(1.0, 1.0, 1.0, 1.0)
TD_I = TransformData(C)
TD_GEN = TransformData(C, 1.3, 0.4, 0.5, (1 + 0.4 * 0.5) / 1.3)


def test_background_potential_examples():
    Q = background_potential(0.0, TD_I)
    assert np.allclose(Q, [[-1, 2 / 9], [0, -1 / 3]], atol=1e-15)
    QH = background_potential(1.0, TD_I)
    assert QH[0, 1] == 0 and QH[1, 0] == 0


@settings(max_examples=100)
@given(st.floats(0, 3), st.floats(0, 3), st.sampled_from([TD_I, TD_GEN]))
def test_kernel_parts_identity(x, y, td):
    tot = kernel_A(x, td) + kernel_B(y, td) + td.c_I * (y - x) / (2 * C.mu_I) * kernel_C(td)
    assert np.allclose(tot, np.eye(2), atol=1e-14)


def test_green_kernel_conditions():
    rng = np.random.default_rng(0)
    for _ in range(50):
        xi = complex(*rng.uniform(-5, 5, 2))
        s = ALL_SHEETS[rng.integers(4)]
        q = quasi_momenta(SpectralPoint(xi, s), C)
        x = rng.uniform(0, 1)
        for td in (TD_I, TD_GEN):
            assert np.abs(green_kernel(x, x, q, td)).max() <= 1e-12
            h = 1e-6
            fd = (green_kernel(x + h, x, q, td) - green_kernel(x - h, x, q, td)) / (2 * h)
            assert np.abs(fd - np.eye(2)).max() <= 1e-8
            assert np.abs(green_kernel_dx(x, x, q, td) - np.eye(2)).max() <= 1e-12


def test_green_kernel_small_separation():
    q = quasi_momenta(SpectralPoint(1.3 + 0.2j), C)
    d = 1e-5
    G = green_kernel(0.5 + d, 0.5, q, TD_GEN)
    assert np.abs(G - d * np.eye(2)).max() <= 1e-8


def test_green_kernel_solves_unperturbed_equation():
    xi = 1.1 + 0.3j
    q = quasi_momenta(SpectralPoint(xi), C)
    y, h = 0.9, 1e-4
    for x in (0.2, 0.5):
        G = lambda t: green_kernel(t, y, q, TD_GEN)
        d2 = (G(x + h) - 2 * G(x) + G(x - h)) / h**2
        resid = -d2 + background_potential(x, TD_GEN) @ G(x) + xi * xi * G(x)
        assert np.abs(resid).max() <= 1e-6 * max(1, np.abs(d2).max())


def test_zero_potential_frame_is_unperturbed():
    m = make_transformed(C, matrix=None, td=TD_GEN)
    xi = 1.4 + 0.5j
    fr = m.frame_at(SpectralPoint(xi))
    q = quasi_momenta(SpectralPoint(xi), C)
    val, der = unperturbed_jost_matrix(0.0, xi, q, TD_GEN)
    assert np.allclose(fr.value0, val) and np.allclose(fr.deriv0, der)


def test_jost_function_assembly():
    th = ThetaMatrix(0.0, 0.0, 0.0, 0.0)
    assert np.allclose(jost_function(np.eye(2), np.eye(2), th, 1.0), np.zeros((2, 2)) + np.eye(2))
    th = ThetaMatrix.from_profile(ElasticProfile.constant(C))
    v, d = np.array([[1, 2j], [0.5, 1]]), np.array([[0.1, 1], [2, 3j]])
    assert np.allclose(jost_function(3 * v, 3 * d, th, 1.5), 3 * jost_function(v, d, th, 1.5))


def test_theta_matrix_values():
    th = ThetaMatrix.from_profile(ElasticProfile.constant(C))
    assert th.theta2 == pytest.approx(1 / 6)
    assert th.theta1 == pytest.approx(1.0) and th.theta3 == 0.0
    assert np.allclose(th.matrix(2.0), [[0, 1 / 6], [8 - 1, 0]])


def test_bridge_determinant_factor():
    xi = 1.7 - 0.4j
    B = bridge_boundary_matrix(np.eye(2), xi, C, 1.2, 0.3)
    assert np.linalg.det(B) == pytest.approx(2 * 1.2 / xi, rel=1e-13)
    with pytest.raises(ValueError, match="origin"):
        bridge_boundary_matrix(np.eye(2), 0.0, C, 1.0, 0.0)


def test_bridge_surface_normalized_matches_displacement():
    m = make_transformed(C, matrix=None)
    dm = DisplacementModel(ElasticProfile.constant(C))
    for xi in (0.8 + 0.3j, 2.0, -1.2 + 2.1j):
        for s in ALL_SHEETS:
            a, _ = m.delta(xi, s)
            b, sc = dm.delta(xi, s)
            assert abs(a - b) <= 1e-10 * sc


def test_modes_agree_and_converge():
    m = make_transformed(C, mode="iterates")
    fine = TransformedModel(m.td, m.potential, m.theta, m.mu0, m.mu0_x, mode="iterates",
                            n_panels=32, c0=m.c0)
    for xi, s in ((3.0 + 1.0j, SheetTag(-1, 1)), (-6.0 + 2.0j, PHYSICAL)):
        p = SpectralPoint(xi, s)
        a = m.frame_at(p).jost_function
        b = m.frame_at(p, "ode").jost_function
        c = fine.frame_at(p).jost_function
        assert np.abs(a - b).max() <= 1e-8 * np.abs(b).max()
        assert np.abs(a - c).max() <= 1e-10 * np.abs(c).max()


def test_physical_sheet_growth_bound(bump_model):
    rng = np.random.default_rng(5)
    vnorm = 0.5 * (0.3 + 0.5 + 0.2 + 0.4) * (2 / 3)
    for _ in range(20):
        xi = complex(*rng.uniform(-8, 8, 2))
        s = SheetTag(1, int(rng.choice([1, -1])))
        p = SpectralPoint(xi, s)
        q = quasi_momenta(p, C)
        fr = bump_model.frame_at(p)
        unpert = make_transformed(C, matrix=None).frame_at(p)
        diff = np.abs(fr.value0 - unpert.value0).max()
        bound = abs(xi) * np.exp(-C.H * min(q.qS.imag, 0)) * np.exp(vnorm / max(1, abs(xi)))
        assert diff <= 10 * 10 * max(bound, 1)


def test_deltas_all_matches_delta(bump_model):
    xi = 2.3 + 0.9j
    d, _ = bump_model.deltas_all(xi)
    for s in ALL_SHEETS:
        assert abs(d[str(s)] - bump_model.delta(xi, s)[0]) <= 1e-9 * abs(d[str(s)])


def test_F_symmetries(bump_model):
    for xi in (0.6 + 0.2j, 3.1 - 1.4j):
        f = bump_model.F(xi)[0]
        assert abs(bump_model.F(-xi)[0] - f) <= 1e-8 * abs(f)
        assert abs(bump_model.F(xi.conjugate())[0] - f.conjugate()) <= 1e-8 * abs(f)


def test_coarse_copy(bump_model):
    zero = make_transformed(C, matrix=None)
    assert zero.coarse() is zero
    co = bump_model.coarse()
    assert co is not bump_model and co.ode_rtol == 1e-8
