# tests/test_number_theory.py
import itertools
import logging
import math
import random
from fractions import Fraction

import pytest

from recurdim import number_theory as nt
from recurdim.errors import BudgetExceeded, InvariantViolation, ValidationError
from recurdim.ifs_core import build_system
from recurdim.potentials import Potential
from recurdim.recurrence import witness_cylinder


# --- Rational expansions ---

@pytest.mark.parametrize("p, q, first, second", [
    (3, 7, [2, 3], [2, 2, 1]),
    (1, 2, [2], [1, 1]),
    (2, 3, [1, 2], [1, 1, 1]),
])
def test_cf_expansions(p, q, first, second):
    assert nt.cf_expansions_of_rational(p, q) == (first, second)


@pytest.mark.parametrize("p, q", [(2, 4), (0, 5), (5, 5), (7, 3)])
def test_cf_expansion_rejects(p, q):
    with pytest.raises(ValidationError):
        nt.cf_expansions_of_rational(p, q)


def test_expansions_evaluate_back():
    rng = random.Random(7)
    checked = 0
    while checked < 1000:
        q = rng.randint(2, 10 ** 6)
        p = rng.randint(1, q - 1)
        if math.gcd(p, q) != 1:
            continue
        first, second = nt.cf_expansions_of_rational(p, q)
        assert nt.evaluate_cf(first) == nt.evaluate_cf(second) == Fraction(p, q)
        assert second[-1] == 1 and first[-1] >= 2
        checked += 1


def test_convergent_matrix():
    assert nt.convergent_matrix((2, 3)) == (1, 3, 2, 7)
    assert nt.convergent_matrix((1, 1, 1)) == (1, 2, 2, 3)


# --- Surds ---

@pytest.mark.parametrize("period, triple, root", [
    ((2, 3), (2, 6, -3), (-6 + math.sqrt(60)) / 4),
    ((2,), (1, 2, -1), math.sqrt(2) - 1),
    ((1,), (1, 1, -1), (math.sqrt(5) - 1) / 2),
    ((1, 1), (1, 1, -1), (math.sqrt(5) - 1) / 2),
])
def test_surd_from_period(period, triple, root):
    surd = nt.surd_from_period(period)
    assert surd.triple == triple
    assert surd.root == pytest.approx(root, abs=1e-15)
    assert float(surd.value()) == pytest.approx(root, abs=1e-15)


def test_surd_digits_are_periodic():
    assert nt.surd_digits(2, 6, -3, 6) == [2, 3, 2, 3, 2, 3]
    assert nt.surd_digits(1, 1, -1, 5) == [1] * 5


def test_surd_digits_reject_rational_roots():
    with pytest.raises(InvariantViolation):
        nt.surd_digits(1, 0, -1, 3)


def test_period_must_be_positive():
    with pytest.raises(ValidationError):
        nt.surd_from_period((2, 0))


def test_induced_quadratics_of_three_sevenths():
    first, second = nt.induced_quadratics(3, 7)
    assert first.triple == (2, 6, -3) and first.period == (2, 3)
    assert second.period == (2, 2, 1)
    assert (first.p, first.q) == (3, 7) == (second.p, second.q)


# --- A_q ---

@pytest.mark.parametrize("q, size", [(1, 0), (2, 2), (3, 4)])
def test_small_aq(q, size):
    assert len(nt.enumerate_Aq(q)) == size


def test_a3_members():
    triples = {s.triple for s in nt.enumerate_Aq(3).members}
    assert triples == {(1, 3, -1), (2, 2, -1), (1, 2, -2), (1, 1, -1)}


def test_aq_size_bound():
    for q in range(1, 61):
        assert len(nt.enumerate_Aq(q)) <= 2 * q


@pytest.mark.slow
def test_aq_size_bound_to_two_hundred():
    for q in range(61, 201):
        assert len(nt.enumerate_Aq(q)) <= 2 * q


@pytest.mark.slow
def test_aq_roots_stay_accurate_for_large_q():
    # p = 1 gives (1, q, -1) with a root near 1/q
    for q in range(250, 401):
        for surd in nt.enumerate_Aq(q).members:
            a, b, c = surd.triple
            assert abs(a * surd.root ** 2 + b * surd.root + c) <= 1e-14 * (abs(a) + abs(b) + abs(c))
            assert nt.surd_digits(a, b, c, 2 * len(surd.period)) == list(surd.period) * 2
            assert float(surd.value()) == pytest.approx(surd.root, rel=1e-14)


def test_surd_with_large_leading_digit():
    surd = nt.surd_from_period((260,))
    assert surd.triple == (1, 260, -1)
    assert surd.root == pytest.approx(2 / (260 + math.sqrt(260 ** 2 + 4)), rel=1e-15)
    assert all(w.q <= 260 for w in nt.dtau_membership(0.5, 1.0, 260))


def test_aq_csv_rows():
    rows = nt.enumerate_Aq(2).csv_rows()
    assert len(rows[0]) == len(nt.AqSet.csv_columns)
    assert {r[2] for r in rows} == {"2", "1 1"}


# --- D(tau) ---

def test_surd_is_found_at_its_own_q():
    x = nt.surd_from_period((2,))
    witnesses = nt.dtau_membership(x, 3.0, 6)
    assert witnesses[0].q == 2 and witnesses[0].distance == 0.0
    assert all(w.nearest.triple == x.triple for w in witnesses)


def test_rational_has_no_witness_for_large_tau():
    assert nt.dtau_membership(Fraction(1, 2), 10.0, 30) == []


def test_dtau_scan_is_independent_of_workers():
    serial = nt.dtau_membership(0.41421356, 0.5, 25, workers=1)
    threaded = nt.dtau_membership(0.41421356, 0.5, 25, workers=4)
    assert [w.to_dict() for w in serial] == [w.to_dict() for w in threaded]


def test_dtau_refuses_over_budget():
    with pytest.raises(BudgetExceeded):
        nt.dtau_membership(0.3, 1.0, 100, budget=1000)


@pytest.mark.parametrize("x, tau", [(1.5, 1.0), (0.5, -1.0)])
def test_dtau_rejects(x, tau):
    with pytest.raises(ValidationError):
        nt.dtau_membership(x, tau, 5)


# --- Checks on witnesses ---

def test_proof_chain_holds():
    report = nt.proof_chain(2, 1.0, 0.5, (1, 2))
    assert report.q == 3
    assert report.holds
    assert len(report.rows) == 3
    assert report.to_dict()["holds"] is True


@pytest.mark.parametrize("amax", [2, pytest.param(3, marks=pytest.mark.slow)])
def test_proof_chain_holds_on_short_words(amax):
    words = [w for n in range(1, 6) for w in itertools.product(range(1, amax + 1), repeat=n) if w != (1,)]
    for word in words:
        report = nt.proof_chain(amax, 1.0, 0.5, word)
        assert report.q >= 2
        assert report.holds, word


def test_proof_chain_needs_nontrivial_denominator():
    with pytest.raises(ValidationError):
        nt.proof_chain(2, 1.0, 0.5, (1,))


def test_mahler_check_on_triadic_cantor(cantor, logderiv1):
    witness = witness_cylinder(cantor, logderiv1, (0, 1))
    check = nt.mahler_check(cantor, witness, 1.0)
    assert check.threshold == Fraction(1, 9)
    assert check.holds


def test_mahler_check_needs_uniform_slopes(cf2):
    witness = witness_cylinder(cf2, Potential.logderiv(1), (1, 2))
    with pytest.raises(ValidationError):
        nt.mahler_check(cf2, witness, 1.0)


# --- Closed forms ---

def test_closed_forms():
    assert nt.closed_form_dimension("badic-const", t=1) == 0.5
    assert nt.closed_form_dimension("cantor-const") == pytest.approx(math.log(2) / math.log(3))
    assert nt.closed_form_dimension("cantor-const", k=3, b=7, t=1) == pytest.approx(math.log(3) / math.log(7) / 2)
    assert nt.closed_form_dimension("dyadic-frequency", t=1) == pytest.approx(math.log2((1 + math.sqrt(5)) / 2))
    assert nt.closed_form_dimension("dyadic-frequency", t=0) == 1.0


def test_dtau_closed_form_warns_below_two(caplog):
    with caplog.at_level(logging.WARNING):
        assert nt.closed_form_dimension("dtau", tau=1.0) == 0.5
    assert "outside the proven range" in caplog.text
    caplog.clear()
    assert nt.closed_form_dimension("dtau", tau=3.0) == 0.25
    assert not caplog.text


def test_unknown_closed_form():
    with pytest.raises(ValidationError):
        nt.closed_form_dimension("sierpinski")


def test_triadic_system_has_base_three():
    assert build_system("cantor:b=3,digits=0|2").base == 3
