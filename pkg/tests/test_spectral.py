import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rayleigh_jost.medium import ElasticProfile, HalfSpaceConstants
from rayleigh_jost.rayleigh_ode import DisplacementModel, determinant_bundle
from rayleigh_jost.riemann import PHYSICAL, SheetTag, SpectralPoint, conjugate
from rayleigh_jost.spectral import (CSV_COLUMNS, DeltaTarget, EntireTarget, FunctionTarget,
                                    InconsistentZero, ResonanceRecord, SearchRegion, classify,
                                    find_zeros, read_records_csv, search, winding_number,
                                    write_records_csv)
from conftest import rayleigh_root_oracle

C = HalfSpaceConstants(1.0, 1.0, 1.0, 1.0)
HOM = DisplacementModel(ElasticProfile.constant(C))
XI_R = rayleigh_root_oracle()


def test_winding_identity_unit_square():
    assert winding_number(FunctionTarget(lambda z: z), (-0.5, 0.5, -0.5, 0.5)) == 1


def test_winding_zero_free():
    assert winding_number(DeltaTarget(HOM), (1.5, 2.5, 0.5, 1.5)) == 0


def test_winding_rayleigh_square():
    assert winding_number(DeltaTarget(HOM), (XI_R - 0.1, XI_R + 0.1, -0.1, 0.1)) == 1


@settings(max_examples=25, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=0.9), min_size=1, max_size=4),
       st.floats(-0.7, 0.7))
def test_winding_additive(roots, cut):
    roots = [r for r in roots if min(abs(r.real - v) for v in (-1, 1, cut)) > 1e-3
             and min(abs(r.imag - v) for v in (-1, 1)) > 1e-3]
    f = FunctionTarget(lambda z: np.prod([z - r for r in roots]) if roots else 1.0)
    whole = winding_number(f, (-1, 1, -1, 1))
    parts = winding_number(f, (-1, cut, -1, 1)) + winding_number(f, (cut, 1, -1, 1))
    assert whole == parts == len(roots)


def test_find_rayleigh_root():
    recs = find_zeros(DeltaTarget(HOM), SearchRegion(0.6 - 0.2j, 1.4 + 0.2j))
    assert len(recs) == 1
    r = recs[0]
    assert abs(r.xi - XI_R) <= 1e-6 and r.multiplicity == 1
    assert r.classification == "eigenvalue" and r.sheet == "++"
    assert r.residual <= 1e-9 * max(1.0, abs(determinant_bundle(HOM.profile, r.xi).d[0]))


def test_unphysical_sheet_matches_grid_scan():
    sheet = SheetTag(1, -1)
    recs = find_zeros(DeltaTarget(HOM, sheet), SearchRegion(0.6 - 0.2j, 1.4 + 0.2j))
    # brute-force oracle: smallest relative |delta| on a 400 x 400 grid off the real axis
    x = np.linspace(0.6, 1.4, 400)
    y = np.linspace(-0.2, 0.2, 400)
    y = y[np.abs(y) > 1e-6]
    best = []
    for xx in x[::8]:
        for yy in y[::8]:
            v, s = HOM.delta(complex(xx, yy), sheet)
            best.append((abs(v) / s, complex(xx, yy)))
    grid_min = min(best)[0]
    if recs:
        for r in recs:
            v, s = HOM.delta(r.xi, sheet, "above" if r.xi.imag >= 0 else "below")
            assert abs(v) <= 1e-9 * s
    else:
        assert grid_min > 1e-3


def test_empty_region():
    assert find_zeros(DeltaTarget(HOM), SearchRegion(2.0 + 2.0j, 2.5 + 2.5j)) == []


def test_F_zeros_union_of_sheets():
    res = search(EntireTarget(HOM), SearchRegion(-3 - 3j, 3 + 3j))
    assert res.consistent and res.total_winding == 12
    reals = sorted(round(abs(r.xi.real), 4) for r in res.records)
    assert reals == [0.5, 0.5, 0.563, 0.563, 1.0877, 1.0877]
    for r in res.records:
        c = classify(r, HOM)
        assert len(c.sheets) == 2
        if abs(abs(r.xi) - XI_R) < 1e-6:
            assert c.classification == "eigenvalue" and set(c.sheets) == {"++", "--"}


def test_classify_conjugate_partner(bump_model):
    rec = search(EntireTarget(bump_model), SearchRegion(0.5 + 0.05j, 0.6 + 0.15j),
                 use_symmetry=False).records[0]
    c = classify(rec, bump_model)
    for s in c.sheets:
        p = conjugate(SpectralPoint(c.xi, SheetTag.parse(s)), bump_model.constants)
        v, sc = bump_model.delta(p.xi, p.sheet)
        assert abs(v) <= 1e-8 * sc


def test_classify_inconsistent():
    with pytest.raises(InconsistentZero, match="inconsistent zero"):
        classify(ResonanceRecord(2.0 + 1.0j, "all", 1, 0.0), HOM)


def test_classification_rule():
    rec = ResonanceRecord(XI_R, "all", 1, 0.0)
    c = classify(rec, HOM)
    assert c.classification == "eigenvalue"


def test_csv_roundtrip(tmp_path):
    recs = [ResonanceRecord(1 + 2j, "--", 1, 1e-14, "resonance"),
            ResonanceRecord(-1 + 0.5j, "++", 2, 3e-13, "eigenvalue")]
    p = tmp_path / "z.csv"
    write_records_csv(recs, p, ["config_hash=abc"])
    text = p.read_text().splitlines()
    assert text[0] == "# config_hash=abc" and text[1] == ",".join(CSV_COLUMNS)
    back = read_records_csv(p)
    assert [r.xi for r in back] == [-1 + 0.5j, 1 + 2j]
    assert back[0].multiplicity == 2
