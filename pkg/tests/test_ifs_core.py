# tests/test_ifs_core.py
import logging
import math
from fractions import Fraction

import numpy as np
import pytest

from recurdim import ifs_core
from recurdim.errors import BudgetExceeded, ValidationError
from recurdim.ifs_core import BranchSpec, build_system, cylinder_record, enumerate_cylinders


def test_badic_constants(dyadic):
    assert dyadic.labels == (0, 1)
    assert dyadic.rho == 0.5 and dyadic.eta == 0.5 and dyadic.K == 1.0
    assert dyadic.K_certified and dyadic.is_affine


def test_cantor_branches(cantor):
    assert cantor.branch(0)(Fraction(1)) == Fraction(1, 3)
    assert cantor.branch(1)(Fraction(0)) == Fraction(2, 3)
    assert cantor.rho == pytest.approx(1 / 3) and cantor.K == 1.0


def test_cf_needs_depth_two_contraction(caplog):
    with caplog.at_level(logging.WARNING):
        system = build_system("cf:amax=2")
    assert system.contraction_depth == 2
    assert system.rho < 1
    assert not system.K_certified
    assert "sampled estimate" in caplog.text


@pytest.mark.parametrize("descriptor, message", [
    ("badic:b=1", "alphabet size"),
    ("cf:amax=1", "alphabet size"),
    ("spiral:b=2", "unknown system kind"),
    ("cantor:b=3,digits=0|0", "distinct"),
    ("affine:[(1/2,0),(1/2,1/4)]", "overlapping"),
    ("affine:[(1/2,0),(1,1/2)]", "does not map"),
])
def test_rejected_descriptors(descriptor, message):
    with pytest.raises(ValidationError, match=message):
        build_system(descriptor)


def test_affine_descriptor():
    system = build_system("affine:[(1/3,0),(1/3,2/3)]")
    assert system.alphabet_size == 2
    assert cylinder_record(system, (1, 0)).lo == Fraction(2, 3)


def test_unknown_symbol(dyadic):
    with pytest.raises(ValidationError, match="not in the alphabet"):
        dyadic.check_word((0, 2))


def test_dyadic_record(dyadic):
    rec = cylinder_record(dyadic, (1, 0))
    assert (rec.lo, rec.hi) == (Fraction(1, 2), Fraction(3, 4))
    assert rec.diameter == Fraction(1, 4)
    assert rec.fixed_point == Fraction(2, 3)
    assert rec.derivative == Fraction(1, 4)


def test_cf_record(cf2):
    rec = cylinder_record(cf2, (1,))
    assert (rec.lo, rec.hi) == (Fraction(1, 2), Fraction(1))
    assert rec.fixed_point == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)
    assert rec.derivative == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-15)


def test_cantor_record(cantor):
    rec = cylinder_record(cantor, (0, 1))
    assert (rec.lo, rec.hi) == (Fraction(2, 9), Fraction(3, 9))
    assert rec.diameter == Fraction(1, 9)


def test_empty_word_rejected(dyadic):
    with pytest.raises(ValidationError):
        cylinder_record(dyadic, ())


def test_enumerate_dyadic(dyadic):
    records = list(enumerate_cylinders(dyadic, 3))
    assert len(records) == 8
    assert all(r.diameter == Fraction(1, 8) for r in records)
    assert [r.word for r in records] == sorted(r.word for r in records)


def test_enumerate_cf_matches_composition(cf2):
    records = list(enumerate_cylinders(cf2, 2))
    assert [r.word for r in records] == [(1, 1), (1, 2), (2, 1), (2, 2)]
    for rec in records:
        a, b = rec.word
        ends = sorted([cf2.branch(a)(cf2.branch(b)(Fraction(0))), cf2.branch(a)(cf2.branch(b)(Fraction(1)))])
        assert [rec.lo, rec.hi] == ends


def test_enumerate_depth_zero(dyadic):
    with pytest.raises(ValidationError):
        list(enumerate_cylinders(dyadic, 0))


def test_budget_refusal(dyadic):
    with pytest.raises(BudgetExceeded):
        ifs_core.check_budget(dyadic, 20, budget=1000)


def test_distortion_bound_holds_on_cf3():
    system = build_system("cf:amax=3")
    for n in range(1, 8):
        for rec in enumerate_cylinders(system, n):
            d = float(rec.derivative)
            assert d / system.K <= float(rec.diameter) <= system.K * d


def test_shift_inverts_phi(cf2, dyadic):
    for system, word in ((cf2, (1, 2, 2)), (dyadic, (1, 0, 1))):
        x = Fraction(1, 3)
        assert system.shift(word, system.phi(word, x)) == x


def test_orbit(dyadic):
    points = ifs_core.orbit(dyadic, (1, 0), Fraction(5, 8))
    assert points == [Fraction(5, 8), Fraction(1, 4), Fraction(1, 2)]


def test_eta_m(dyadic, cf2):
    assert dyadic.eta_m(2) == Fraction(1, 4)
    assert cf2.eta_m(2) == min(r.diameter for r in enumerate_cylinders(cf2, 2))


def test_level_chunks_agree_with_records(cf2):
    chunks = ifs_core.level_chunks(cf2, 6)
    level = ifs_core.concat_levels(chunks)
    records = list(enumerate_cylinders(cf2, 6))
    assert level.count == len(records)
    assert [tuple(w) for w in level.words] == [r.word for r in records]
    np.testing.assert_allclose(level.lo, [float(r.lo) for r in records], rtol=1e-12)
    np.testing.assert_allclose(level.log_derivative, [math.log(r.derivative) for r in records], atol=1e-12)


def test_level_chunks_independent_of_workers(cf2):
    serial = ifs_core.concat_levels(ifs_core.level_chunks(cf2, 8, workers=1))
    threaded = ifs_core.concat_levels(ifs_core.level_chunks(cf2, 8, workers=3))
    assert np.array_equal(serial.log_derivative, threaded.log_derivative)
    assert np.array_equal(serial.words, threaded.words)


def test_callback_branches():
    branches = [BranchSpec.callback(lambda x: x / 2, lambda x: 0.5),
                BranchSpec.callback(lambda x: 0.5 + x / 2, lambda x: 0.5)]
    system = ifs_core.system_from_branches(branches, descriptor="halves")
    rec = cylinder_record(system, (1, 0))
    assert rec.lo == pytest.approx(0.5) and rec.hi == pytest.approx(0.75)
    assert rec.fixed_point == pytest.approx(2 / 3, abs=1e-12)


def diameters(system, max_depth):
    return {rec.word: rec.diameter for n in range(1, max_depth + 1) for rec in enumerate_cylinders(system, n)}


def test_distortion_bound_at_depth_twelve_on_cf3():
    system = build_system("cf:amax=3")
    level = ifs_core.concat_levels(ifs_core.level_chunks(system, 12, workers=3))
    # the diameter lies between the inf and sup of |phi_w'| on [0, 1]
    log_k = math.log(system.K)
    assert np.all(level.log_sup_derivative - level.log_derivative <= log_k)
    assert np.all(level.log_derivative - level.log_inf_derivative <= log_k)


def test_quasi_multiplicativity_on_cf2(cf2):
    diam = diameters(cf2, 10)
    for word, d in diam.items():
        for k in range(1, len(word)):
            ratio = float(d / (diam[word[:k]] * diam[word[k:]]))
            assert 1 / cf2.K - 1e-12 <= ratio <= cf2.K + 1e-12, (word, k)


@pytest.mark.parametrize("descriptor, depth", [("cf:amax=2", 10), ("cf:amax=3", 6), ("cantor:b=3,digits=0|2", 8)])
def test_diameter_below_rho_power(descriptor, depth):
    system = build_system(descriptor)
    for word, d in diameters(system, depth).items():
        assert float(d) <= system.rho ** len(word) * (1 + 1e-12)


@pytest.mark.parametrize("descriptor", ["cf:amax=2", "cf:amax=3", "affine:[(1/3,0),(1/2,1/2)]"])
def test_prefix_diameter_ratio(descriptor):
    system = build_system(descriptor)
    diam = diameters(system, 6)
    for word, d in diam.items():
        if len(word) > 1:
            ratio = d / diam[word[:-1]]
            assert system.eta - 1e-12 <= float(ratio) <= 1


@pytest.mark.parametrize("descriptor", ["cf:amax=2", "cantor:b=3,digits=0|2", "badic:b=3"])
def test_cylinders_have_disjoint_interiors(descriptor):
    system = build_system(descriptor)
    for n in range(1, 7):
        records = sorted(enumerate_cylinders(system, n), key=lambda r: r.lo)
        assert all(a.hi <= b.lo for a, b in zip(records, records[1:]))
