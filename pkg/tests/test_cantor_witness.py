# tests/test_cantor_witness.py
import math
from fractions import Fraction

import pytest

from recurdim import cantor_witness, potentials
from recurdim.cantor_witness import (assign_measure, build_block_tree, build_levels, holder_check,
                                     local_root, select_gamma)
from recurdim.errors import BudgetExceeded, ValidationError
from recurdim.ifs_core import build_system
from recurdim.potentials import Potential


def test_root_selection(dyadic, zero):
    gamma = select_gamma(dyadic, zero, 2, (), 1.0)
    assert gamma.selected == ((0, 0), (1, 1))
    assert gamma.floor == Fraction(1, 4)
    assert gamma.achieved == pytest.approx(0.5)
    assert gamma.achieved >= gamma.sum_floor


def test_selection_under_prefix(dyadic, zero):
    gamma = select_gamma(dyadic, zero, 2, (0,), 1.0)
    assert gamma.floor == Fraction(1, 8)
    assert gamma.selected == ((0, 0), (1, 1))
    assert gamma.intervals == ((Fraction(0), Fraction(1, 8)), (Fraction(3, 8), Fraction(1, 2)))


def test_adjacent_children_give_singleton(dyadic, zero):
    gamma = select_gamma(dyadic, zero, 1, (1, 0), 1.0)
    assert len(gamma.selected) == 1
    assert gamma.achieved == pytest.approx(0.5)
    assert local_root(dyadic, zero, gamma) == 0.0


def test_local_root_of_reference_selection(dyadic, zero):
    gamma = select_gamma(dyadic, zero, 2, (), 1.0)
    assert local_root(dyadic, zero, gamma) == pytest.approx(0.5, abs=1e-13)


def test_selection_on_cf_is_separated(cf2, logderiv1):
    from recurdim import thermo
    s = thermo.bowen_root(cf2, logderiv1, 3)
    for v in [(), (1,), (2, 1)]:
        gamma = select_gamma(cf2, logderiv1, 3, v, s)
        intervals = sorted(gamma.intervals)
        assert all(b[0] - a[1] > gamma.floor for a, b in zip(intervals, intervals[1:]))
        assert gamma.achieved >= 1 / (33 * cf2.K)
        assert local_root(cf2, logderiv1, gamma) <= s + 1e-12


def test_full_selection_recovers_partition_root():
    # gaps of 2/7 clear the floor 1/7, so every child is admitted
    system = build_system("cantor:b=7,digits=0|3|6")
    gamma = select_gamma(system, Potential.logderiv(1), 1, (), 0.5)
    assert len(gamma.selected) == 3
    assert local_root(system, Potential.logderiv(1), gamma) == pytest.approx(math.log(3) / math.log(49), abs=1e-13)


def test_reference_tree_measure(dyadic, zero):
    tree = build_block_tree(dyadic, zero, 2, 4, s_target=1.0)
    measures = assign_measure(tree)
    leaves = tree.leaves()
    assert len(leaves) == 16
    masses = {mn.word: mn.mass for mn in measures}
    assert all(masses[leaf.word] == pytest.approx(2 ** -4) for leaf in leaves)
    assert masses[(0, 0)] == pytest.approx(0.5) and masses[(1, 1)] == pytest.approx(0.5)
    assert math.fsum(masses[leaf.word] for leaf in leaves) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("s_eps, passes", [(0.45, True), (0.55, False)])
def test_reference_tree_holder(dyadic, zero, s_eps, passes):
    tree = build_block_tree(dyadic, zero, 2, 4, s_target=1.0)
    report = holder_check(tree, assign_measure(tree), s_eps)
    assert report.passed is passes
    block_rows = [r for r in report.rows if r.kind == "block"]
    assert all(r.local_exponent == pytest.approx(0.5) for r in block_rows)
    if passes:
        assert report.M == pytest.approx(1.0)
        assert math.isfinite(report.M_ball)


def test_holder_rejects_exponent_above_dimension(dyadic, zero):
    tree = build_block_tree(dyadic, zero, 2, 1, s_target=1.0)
    with pytest.raises(ValidationError):
        holder_check(tree, assign_measure(tree), 1.2)


def test_levels_worked_example(dyadic, logderiv1):
    tree = build_levels(dyadic, logderiv1, m=2, eps=0.5, k_max=1, blocks=2)
    leaves = tree.leaves()
    prefixes = sorted(leaf.word[:4] for leaf in leaves)
    assert prefixes == [(0, 0, 0, 0), (0, 0, 1, 1), (1, 1, 0, 0), (1, 1, 1, 1)]
    assert all(leaf.t == 5 and leaf.depth == 9 for leaf in leaves)
    assert tree.s_target == pytest.approx(0.5, abs=1e-12)
    measures = assign_measure(tree)
    leaf_mass = {mn.word: mn.mass for mn in measures if mn.kind == "suffix"}
    assert math.fsum(leaf_mass.values()) == pytest.approx(1.0, abs=1e-12)
    assert set(tree.flags) == {"near_dimension", "weight_margin", "tempered", "distortion_absorbed"}


def test_tempered_flag_follows_tempered_depth(dyadic, logderiv1, monkeypatch):
    calls = []

    def no_depth(system, pot, eps, n_max, **kwargs):
        calls.append((eps, n_max))
        return None

    monkeypatch.setattr(potentials, "tempered_depth", no_depth)
    tree = build_levels(dyadic, logderiv1, m=2, eps=0.5, k_max=1, blocks=2)
    assert calls == [(0.5, 2)]
    assert tree.flags["tempered"] is False


@pytest.mark.parametrize("eps", [0.05, 0.5, 2.0])
def test_tempered_flag_on_cf(cf2, logderiv1, eps):
    tree = build_levels(cf2, logderiv1, m=2, eps=eps, k_max=1, blocks=1)
    assert tree.flags["tempered"] is (potentials.tempered_depth(cf2, logderiv1, eps, n_max=2) is not None)


def test_levels_root_only(dyadic, logderiv1):
    tree = build_levels(dyadic, logderiv1, m=2, eps=0.5, k_max=0)
    assert len(tree.nodes) == 1 and tree.leaves()[0].word == ()


def test_levels_need_positive_potential(dyadic, zero):
    with pytest.raises(ValidationError):
        build_levels(dyadic, zero, m=2, eps=0.5, k_max=1)


def test_two_generation_leaves_are_disjoint(dyadic, logderiv1):
    tree = build_levels(dyadic, logderiv1, m=2, eps=0.5, k_max=2, blocks=[1, 1])
    assert [len(tree.leaves(g)) for g in (1, 2)] == [2, 4]
    # depth 2 plus t=3 gives 5, then depth 7 plus t=8 gives 15
    assert {leaf.depth for leaf in tree.leaves()} == {15}
    for generation in (1, 2):
        leaves = sorted(tree.leaves(generation), key=lambda n: n.lo)
        assert all(a.hi < b.lo for a, b in zip(leaves, leaves[1:]))
    measures = assign_measure(tree)
    report = holder_check(tree, measures, 0.1)
    assert report.rows and report.min_exponent > 0


def test_levels_on_cf(cf2):
    tree = build_levels(cf2, Potential.logderiv(1), m=2, eps=0.5, k_max=1, blocks=1)
    assert tree.leaves()
    for leaf in tree.leaves():
        parent = tree.nodes[leaf.parent]
        assert leaf.word[:parent.depth] == parent.word
    assert len(tree.growth) == 1


def test_node_budget(dyadic, zero):
    with pytest.raises(BudgetExceeded):
        build_block_tree(dyadic, zero, 2, 6, s_target=1.0, node_budget=20)


def test_constants():
    assert cantor_witness.holder_target(0.5, 0.0, 0.0, 0.5) == 0.5
    assert cantor_witness.holder_target(1.0, 1.0, 0.1, math.exp(-1)) == pytest.approx(0.8 / 1.4)
    assert cantor_witness.root_gap_bound(2, 0.1, 1.0, 0.5) == pytest.approx(
        0.4 * math.log(1 / 33) / (math.log(2) * -0.6))
