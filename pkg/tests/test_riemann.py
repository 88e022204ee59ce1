import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from rayleigh_jost.medium import HalfSpaceConstants
from rayleigh_jost.riemann import (ALL_SHEETS, PHYSICAL, BranchPointError, SheetTag, SpectralPoint,
                                   apply_mapping, asymptotic_bound, asymptotic_check, conjugate,
                                   quasi_momenta, reflect, sheet_of)

C = HalfSpaceConstants(1.0, 1.0, 1.0, 1.0)
coord = st.floats(-6, 6, allow_nan=False)
sheets = st.sampled_from(ALL_SHEETS)


def off_cut(x, y):
    return abs(x) > 1e-6 and abs(y) > 1e-6


def test_examples_xi_two():
    q = quasi_momenta(SpectralPoint(2.0, PHYSICAL), C)
    assert q.qP == pytest.approx(1.9148542155126762j, abs=1e-12)
    assert q.qS == pytest.approx(1.7320508075688772j, abs=1e-12)
    q = quasi_momenta(SpectralPoint(2.0, SheetTag(-1, -1)), C)
    assert q.qP == pytest.approx(-1.9148542155126762j, abs=1e-12)
    assert q.qS == pytest.approx(-1.7320508075688772j, abs=1e-12)


def test_below_cut_is_positive_real():
    q = quasi_momenta(SpectralPoint(0.5, PHYSICAL, "below"), C)
    assert q.qP == pytest.approx(0.28867513459481287, abs=1e-14)
    assert q.qS == pytest.approx(0.8660254037844386, abs=1e-14)


def test_cut_sides_are_limits():
    for xi in (0.3, 0.8, 0.4j, -0.7):
        for side, eps in (("below", -1e-11), ("above", 1e-11)):
            p = SpectralPoint(xi, PHYSICAL, side)
            d = (eps * 1j) if complex(xi).imag == 0 else (-eps)
            q_lim = quasi_momenta(SpectralPoint(xi + d, PHYSICAL), C)
            q = quasi_momenta(p, C)
            assert abs(q.qP - q_lim.qP) < 1e-8 and abs(q.qS - q_lim.qS) < 1e-8


def test_branch_points_rejected():
    for xi in (C.r_plus, -C.r_minus, C.r_minus + 1e-14):
        with pytest.raises(BranchPointError, match="branch point"):
            quasi_momenta(SpectralPoint(xi), C)


def test_sheet_tag_parsing():
    assert SheetTag.parse("(+,-)") == SheetTag(1, -1)
    assert str(SheetTag(-1, 1)) == "-+"
    with pytest.raises(ValueError):
        SheetTag.parse("+x")


@settings(max_examples=300)
@given(coord, coord, sheets)
def test_signs_and_squares(x, y, s):
    assume(off_cut(x, y))
    xi = complex(x, y)
    q = quasi_momenta(SpectralPoint(xi, s), C)
    assert sheet_of(q) == s
    assert abs(q.qP**2 - (C.kP2 - xi * xi)) <= 1e-14 * max(1, abs(xi) ** 2) * 4
    assert abs(q.qS**2 - (C.kS2 - xi * xi)) <= 1e-14 * max(1, abs(xi) ** 2) * 4


@settings(max_examples=300)
@given(coord, coord, st.sampled_from([1, -1]))
def test_sheet_sign_lemma(x, y, sP):
    assume(off_cut(x, y))
    for sS in (1, -1):
        q = quasi_momenta(SpectralPoint(complex(x, y), SheetTag(sP, sS)), C)
        assert np.sign((q.qP + q.qS).imag) == sP
        assert np.sign((q.qP - q.qS).imag) == sP


@given(coord, coord, sheets, st.sampled_from(["P", "S", "PS"]))
def test_mappings(x, y, s, which):
    assume(off_cut(x, y))
    p = SpectralPoint(complex(x, y), s)
    q = quasi_momenta(p, C)
    m = apply_mapping(p, which)
    qm = quasi_momenta(m, C)
    fP = -1 if "P" in which else 1
    fS = -1 if "S" in which else 1
    assert qm.qP == fP * q.qP and qm.qS == fS * q.qS
    assert apply_mapping(m, which) == p


def test_mapping_examples():
    assert apply_mapping(SpectralPoint(1 + 1j), "S").sheet == SheetTag(1, -1)
    assert apply_mapping(SpectralPoint(1 + 1j, SheetTag(-1, 1)), "PS").sheet == SheetTag(1, -1)


@given(coord, coord, sheets, st.sampled_from(["above", "below"]))
def test_reflection_keeps_q(x, y, s, side):
    assume(not (x == 0 and y == 0))
    assume(min(abs(abs(complex(x, y)) - r) for r in (C.r_plus, C.r_minus)) > 1e-6)
    p = SpectralPoint(complex(x, y), s, side)
    q, qr = quasi_momenta(p, C), quasi_momenta(reflect(p), C)
    assert reflect(p).xi == -p.xi
    assert abs(q.qP - qr.qP) <= 1e-14 * max(1, abs(q.qP))
    assert abs(q.qS - qr.qS) <= 1e-14 * max(1, abs(q.qS))


def test_reflection_examples():
    p = SpectralPoint(1 + 1j, SheetTag(-1, -1))
    assert reflect(p).xi == -1 - 1j and reflect(p).sheet == p.sheet


@given(coord, coord, sheets)
def test_conjugation_identity(x, y, s):
    assume(off_cut(x, y))
    p = SpectralPoint(complex(x, y), s)
    q, qc = quasi_momenta(p, C), quasi_momenta(conjugate(p, C), C)
    assert abs(qc.qP + q.qP.conjugate()) <= 1e-14 * max(1, abs(q.qP))
    assert abs(qc.qS + q.qS.conjugate()) <= 1e-14 * max(1, abs(q.qS))


def test_conjugation_on_cut_rejected():
    with pytest.raises(ValueError):
        conjugate(SpectralPoint(3j), C)
    with pytest.raises(ValueError):
        conjugate(SpectralPoint(0.5), C)


def test_conjugation_examples():
    p = SpectralPoint(2 + 1j)
    q, qc = quasi_momenta(p, C), quasi_momenta(conjugate(p, C), C)
    assert abs(qc.qP + q.qP.conjugate()) < 1e-14
    q = quasi_momenta(SpectralPoint(3.0), C)   # purely imaginary for real xi > r_minus
    assert q.qP.real == 0 and q.qS.real == 0


@pytest.mark.parametrize("xi, sheet", [(100.0, PHYSICAL), (100.0, SheetTag(-1, -1)),
                                       (100 * (1 - 1j) / np.sqrt(2), PHYSICAL)])
def test_asymptotic_forms(xi, sheet):
    p = SpectralPoint(xi, sheet)
    assert asymptotic_check(p, C) <= asymptotic_bound(p, C)
    assert asymptotic_bound(p, C) == pytest.approx(0.011)
