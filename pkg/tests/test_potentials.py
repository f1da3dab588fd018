# tests/test_potentials.py
import math
from fractions import Fraction

import numpy as np
import pytest

from recurdim import ifs_core
from recurdim.errors import ValidationError
from recurdim.potentials import Potential, PotentialKind, parse_potential, tempered_depth, variation_bound


def test_digit_indicator_sum(dyadic):
    pot = Potential.digitind(1, 0)
    assert pot.birkhoff_sum(dyadic, (0, 0, 1)) == pytest.approx(2 * math.log(2))


def test_logderiv_sum_on_triadic(triadic):
    pot = Potential.logderiv(1)
    assert pot.birkhoff_sum(triadic, (2, 0, 1, 1)) == pytest.approx(4 * math.log(3))


def test_constant_sum(dyadic):
    assert Potential.const(0.7).birkhoff_sum(dyadic, (0, 1, 1, 0, 1)) == pytest.approx(3.5)


def test_negative_potential_rejected():
    with pytest.raises(ValidationError):
        Potential.const(-0.1)


@pytest.mark.parametrize("descriptor, kind, value", [
    ("const:c=0.7", PotentialKind.CONST, 0.7),
    ("logderiv:t=1/2", PotentialKind.LOGDERIV, 0.5),
    ("digitind:t=2,digit=1", PotentialKind.DIGITIND, 2.0),
])
def test_parse_potential(descriptor, kind, value):
    pot = parse_potential(descriptor)
    assert pot.kind is kind and pot.value == pytest.approx(value)
    assert pot.descriptor == descriptor


@pytest.mark.parametrize("descriptor", ["logderiv:s=1", "wave:t=1", "const", "const:c=x"])
def test_parse_potential_errors(descriptor):
    with pytest.raises(ValidationError):
        parse_potential(descriptor)


def test_digit_must_be_in_alphabet(dyadic):
    with pytest.raises(ValidationError):
        Potential.digitind(1, 5).check_compatible(dyadic)


def test_birkhoff_sum_at_matches_representative_on_affine(dyadic):
    pot = Potential.digitind(1, 1)
    word = (1, 0, 1)
    x = ifs_core.cylinder_record(dyadic, word).midpoint
    assert pot.birkhoff_sum_at(dyadic, word, x) == pytest.approx(pot.birkhoff_sum(dyadic, word))


def test_plus_shifts_every_term(dyadic):
    pot = Potential.logderiv(1).plus(0.25)
    assert pot.birkhoff_sum(dyadic, (0, 1)) == pytest.approx(2 * math.log(2) + 0.5)


def test_radius_exact_on_affine(dyadic, logderiv1):
    assert logderiv1.radius(dyadic, (0, 1)) == Fraction(1, 4)
    assert Potential.digitind(2, 0).radius(dyadic, (0, 1, 0)) == Fraction(1, 16)


def test_variation_of_locally_constant_potentials(dyadic):
    assert variation_bound(dyadic, Potential.const(2), 3).bound == 0
    assert variation_bound(dyadic, Potential.digitind(1, 0), 1).bound == 0
    assert variation_bound(dyadic, Potential.logderiv(1), 4).bound == 0


def test_logderiv_variation_on_cf(cf2):
    bound = variation_bound(cf2, Potential.logderiv(2), 5)
    assert bound.certified
    worst = 0.0
    for rec in ifs_core.enumerate_cylinders(cf2, 5):
        c, d = float(rec.matrix[2]), float(rec.matrix[3])
        ends = (abs(d), abs(c + d))
        worst = max(worst, 2 * math.log(max(ends) / min(ends)))
    assert 0 < bound.bound <= 2 * worst + 1e-12


def test_logderiv_variation_decreases(cf2):
    bounds = [variation_bound(cf2, Potential.logderiv(1), n).bound for n in (2, 4, 6, 8)]
    assert all(a > b for a, b in zip(bounds, bounds[1:]))


def test_sampled_variation_is_flagged(cf2, caplog):
    pot = Potential.callback(lambda x: x * x, "square")
    bound = variation_bound(cf2, pot, 3)
    assert not bound.certified
    assert "sampled" in caplog.text


def test_tempered_depth(cf2, dyadic):
    assert tempered_depth(dyadic, Potential.logderiv(1), 0.01) == 1
    depth = tempered_depth(cf2, Potential.logderiv(1), 0.5, n_max=10)
    assert depth is not None and depth >= 1


def test_sup_norm_and_inf(cf2, dyadic):
    assert Potential.logderiv(1).sup_norm(dyadic) == pytest.approx(math.log(2))
    assert Potential.digitind(1, 0).inf_value(dyadic) == 0
    assert Potential.logderiv(1).is_strictly_positive(cf2)
    assert not Potential.digitind(1, 0).is_strictly_positive(dyadic)


def test_birkhoff_level_matches_records(cf2):
    pot = Potential.logderiv(1.5)
    level = ifs_core.concat_levels(ifs_core.level_chunks(cf2, 5))
    expected = [pot.birkhoff_sum(cf2, r.word, r) for r in ifs_core.enumerate_cylinders(cf2, 5)]
    np.testing.assert_allclose(pot.birkhoff_level(cf2, level), expected, atol=1e-11)


@pytest.mark.parametrize("pot", [Potential.logderiv(1.5), Potential.digitind(1, 2).plus(0.25)])
def test_birkhoff_additivity_along_orbit(cf2, pot):
    for w, v in (((1, 2), (2, 2, 1)), ((2,), (1, 1, 1, 2)), ((2, 1, 1), (1,))):
        x = ifs_core.cylinder_record(cf2, w + v).midpoint
        whole = pot.birkhoff_sum_at(cf2, w + v, x)
        split = pot.birkhoff_sum_at(cf2, w, x) + pot.birkhoff_sum_at(cf2, v, cf2.shift(w, x))
        assert whole == pytest.approx(split, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("pot", [Potential.logderiv(1), Potential.digitind(2, 1), Potential.const(0.3).plus(0.1)])
def test_birkhoff_sum_below_sup_norm(cf2, pot):
    bound = pot.sup_norm(cf2)
    for n in range(1, 7):
        for rec in ifs_core.enumerate_cylinders(cf2, n):
            assert pot.birkhoff_sum(cf2, rec.word, rec) <= n * bound + 1e-12


def test_oscillation_within_tempered_budget(cf2):
    pot, eps = Potential.logderiv(1), 0.5
    depth = tempered_depth(cf2, pot, eps, n_max=10)
    assert depth is not None
    for n in range(depth, depth + 3):
        for rec in ifs_core.enumerate_cylinders(cf2, n):
            points = [rec.lo + (rec.hi - rec.lo) * Fraction(j, 4) for j in range(5)]
            sums = [pot.birkhoff_sum_at(cf2, rec.word, x) for x in points]
            assert max(sums) - min(sums) <= n * eps + 1e-12
