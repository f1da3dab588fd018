# recurdim/cantor_witness.py
"""
Desk-scale version of the lower-bound construction: separated subfamilies of
depth-m words, local Bowen roots, the leveled Cantor tree, the mass assignment
on it, and the Hoelder check of that mass.

Structural invariants (separation, witness inclusion, the return-depth bound,
disjoint leaves) are enforced strictly. The asymptotic conditions on m are only
recorded as flags.
"""
import bisect
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from recurdim import ifs_core, potentials, thermo
from recurdim.errors import BudgetExceeded, InvariantViolation, ValidationError
from recurdim.ifs_core import IfsSystem, Number, Word
from recurdim.potentials import Potential
from recurdim.recurrence import jn_exact_interval, witness_cylinder

logger = logging.getLogger(__name__)

# --- Constants ---
SEPARATION_CONSTANT = 33
LOCAL_ROOT_TOL = 1e-14
MEASURE_TOL = 1e-12
ROOT_SLACK = 1e-12
DEFAULT_NODE_BUDGET = 200_000
BALL_SAMPLES = 64


@dataclass(frozen=True)
class GammaSelection:
    parent: Word
    m: int
    selected: Tuple[Word, ...]
    log_bases: Tuple[float, ...]
    intervals: Tuple[Tuple[Number, Number], ...]
    s_target: float
    achieved: float
    floor: Number
    sum_floor: float

    def to_dict(self) -> dict:
        return {"parent": list(self.parent), "m": self.m, "selected": [list(w) for w in self.selected],
                "achieved": self.achieved, "floor": float(self.floor), "sum_floor": self.sum_floor}


def _log_base(system: IfsSystem, pot: Potential, record: ifs_core.CylinderRecord) -> float:
    """log(D_w e^{-S_m f([w])})."""
    return math.log(record.derivative) - pot.birkhoff_sum(system, record.word, record)


def _child_interval(system: IfsSystem, parent_matrix, parent: Word, rec) -> Tuple[Number, Number]:
    if parent_matrix is not None:
        x0 = ifs_core.apply_matrix(parent_matrix, rec.lo)
        x1 = ifs_core.apply_matrix(parent_matrix, rec.hi)
    else:
        x0, x1 = system.phi(parent, rec.lo), system.phi(parent, rec.hi)
    return (x0, x1) if x0 <= x1 else (x1, x0)


def select_gamma(system: IfsSystem, pot: Potential, m: int, v: Sequence[int], s_target: float,
                 budget: int = ifs_core.DEFAULT_BUDGET) -> GammaSelection:
    """Greedy max-weight subfamily of depth-m words whose child cylinders are pairwise
    farther apart than eta_m |I_t(v)|."""
    v = system.check_word(v)
    if s_target < 0:
        raise ValidationError("s_target must be nonnegative")
    parent_diameter = ifs_core.cylinder_record(system, v).diameter if v else Fraction(1)
    floor = system.eta_m(m, budget) * parent_diameter
    parent_matrix = system.word_matrix(v) if system.is_projective else None

    candidates = []
    for rec in ifs_core.enumerate_cylinders(system, m, budget):
        log_base = _log_base(system, pot, rec)
        lo, hi = _child_interval(system, parent_matrix, v, rec)
        candidates.append((-math.exp(s_target * log_base), rec.word, lo, hi, log_base))
    candidates.sort(key=lambda c: (c[0], c[1]))

    los: List[Number] = []
    his: List[Number] = []
    chosen = []
    for neg_weight, word, lo, hi, log_base in candidates:
        i = bisect.bisect_left(los, lo)
        if i > 0 and lo - his[i - 1] <= floor:
            continue
        if i < len(los) and los[i] - hi <= floor:
            continue
        los.insert(i, lo)
        his.insert(i, hi)
        chosen.append((word, log_base, (lo, hi), -neg_weight))

    achieved = math.fsum(c[3] for c in chosen)
    sum_floor = 1.0 / (SEPARATION_CONSTANT * system.K)
    if achieved < sum_floor:
        raise InvariantViolation(f"selection under {v} reaches {achieved:.6g} < 1/(33K) = {sum_floor:.6g}")
    chosen.sort(key=lambda c: c[0])
    return GammaSelection(
        parent=v, m=m, selected=tuple(c[0] for c in chosen), log_bases=tuple(c[1] for c in chosen),
        intervals=tuple(c[2] for c in chosen), s_target=s_target, achieved=achieved,
        floor=floor, sum_floor=sum_floor,
    )


def local_root(system: IfsSystem, pot: Potential, gamma: GammaSelection) -> float:
    """s_{m,v}: the s where sum over the selection of (D_w e^{-S_m f})^s equals 1."""
    if not gamma.selected:
        raise ValidationError("local_root needs a nonempty selection")
    log_bases = np.array([_log_base(system, pot, ifs_core.cylinder_record(system, w)) for w in gamma.selected])
    s, _ = thermo.solve_partition_root(lambda s: float(logsumexp(s * log_bases)),
                                       float(np.abs(log_bases).max()), LOCAL_ROOT_TOL,
                                       max(1.0, 2.0 * gamma.s_target))
    return s


def root_gap_bound(m: int, eps: float, K: float, rho: float) -> float:
    """Upper bound on s_m(f) - s_{m,v} once the depth-m weight condition holds."""
    log_floor = math.log(1.0 / (SEPARATION_CONSTANT * K))
    return 4.0 * eps * log_floor / (-math.log(rho) * (-2.0 * math.log(K) - 3.0 * m * eps))


def holder_target(s: float, C: float, eps: float, rho: float) -> float:
    """The exponent (s - (C+1) eps) / (1 + 4 eps / (-log rho))."""
    return (s - (C + 1.0) * eps) / (1.0 + 4.0 * eps / -math.log(rho))


# --- The tree ---

@dataclass
class TreeNode:
    index: int
    word: Word
    generation: int
    kind: str
    lo: Number
    hi: Number
    parent: Optional[int] = None
    children: List[int] = field(default_factory=list)
    log_base: float = 0.0
    s_local: Optional[float] = None
    selection: Optional[GammaSelection] = None
    t: Optional[int] = None

    @property
    def depth(self) -> int:
        return len(self.word)

    @property
    def diameter(self) -> Number:
        return self.hi - self.lo


@dataclass
class CantorTree:
    system: IfsSystem
    potential: Potential
    m: int
    eps: Optional[float]
    k_max: int
    blocks: List[int]
    s_target: float
    s_reference: Optional[float]
    nodes: List[TreeNode] = field(default_factory=list)
    generations: List[List[int]] = field(default_factory=list)
    flags: Dict[str, bool] = field(default_factory=dict)
    growth: List[bool] = field(default_factory=list)
    diagnostics: Dict[str, float] = field(default_factory=dict)
    node_budget: int = DEFAULT_NODE_BUDGET

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def leaves(self, generation: Optional[int] = None) -> List[TreeNode]:
        indices = self.generations[-1 if generation is None else generation]
        return [self.nodes[i] for i in indices]

    def add_node(self, word: Word, generation: int, kind: str, parent: Optional[int], **kwargs) -> TreeNode:
        if len(self.nodes) >= self.node_budget:
            raise BudgetExceeded(f"Cantor tree exceeds the node budget of {self.node_budget}")
        if word:
            rec = ifs_core.cylinder_record(self.system, word)
            lo, hi = rec.lo, rec.hi
        else:
            lo, hi = Fraction(0), Fraction(1)
        node = TreeNode(len(self.nodes), word, generation, kind, lo, hi, parent, **kwargs)
        self.nodes.append(node)
        if parent is not None:
            self.nodes[parent].children.append(node.index)
        return node

    def to_dict(self, measures: Optional[List["MeasureNode"]] = None) -> dict:
        masses = {mn.node: mn.mass for mn in measures or [] if mn.node is not None}
        return {
            "system": self.system.to_dict(), "potential": self.potential.to_dict(),
            "params": {"m": self.m, "eps": self.eps, "k_max": self.k_max, "blocks": self.blocks,
                       "s_target": self.s_target, "s_reference": self.s_reference},
            "flags": self.flags, "growth": self.growth, "diagnostics": self.diagnostics,
            "nodes": [{
                "word": list(n.word), "depth": n.depth, "generation": n.generation, "kind": n.kind,
                "interval": [float(n.lo), float(n.hi)], "mass": masses.get(n.index),
                "s_local": n.s_local, "t": n.t,
                "flags": {"separated": n.selection is not None} if n.children else {},
            } for n in self.nodes],
        }


def _grow_blocks(tree: CantorTree, start: TreeNode, blocks: int, budget: int) -> List[TreeNode]:
    system, pot, m = tree.system, tree.potential, tree.m
    frontier = [start]
    for _ in range(blocks):
        grown = []
        for node in frontier:
            gamma = select_gamma(system, pot, m, node.word, tree.s_target, budget)
            _check_separation(gamma)
            node.selection = gamma
            node.s_local = local_root(system, pot, gamma)
            if node.s_local > tree.s_target + ROOT_SLACK:
                raise InvariantViolation(f"local root {node.s_local} exceeds s_m(f) = {tree.s_target} under {node.word}")
            for word, log_base in zip(gamma.selected, gamma.log_bases):
                grown.append(tree.add_node(node.word + word, start.generation + 1, "block", node.index, log_base=log_base))
        frontier = grown
    return frontier


def _check_separation(gamma: GammaSelection) -> None:
    intervals = sorted(gamma.intervals)
    for (lo1, hi1), (lo2, hi2) in zip(intervals, intervals[1:]):
        if not lo2 - hi1 > gamma.floor:
            raise InvariantViolation(f"selection under {gamma.parent} has a gap {float(lo2 - hi1)} <= floor")


def _check_disjoint(nodes: Sequence[TreeNode]) -> None:
    ordered = sorted(nodes, key=lambda n: n.lo)
    for a, b in zip(ordered, ordered[1:]):
        if not a.hi < b.lo:
            raise InvariantViolation(f"leaves {a.word} and {b.word} are not separated")


def build_block_tree(system: IfsSystem, pot: Potential, m: int, blocks: int,
                     s_target: Optional[float] = None, budget: int = ifs_core.DEFAULT_BUDGET,
                     node_budget: int = DEFAULT_NODE_BUDGET, workers: int = 1) -> CantorTree:
    """A chain of `blocks` selections of depth-m words below the root, without return suffixes."""
    if m < 1 or blocks < 0:
        raise ValidationError("need m >= 1 and blocks >= 0")
    pot.check_compatible(system)
    if s_target is None:
        s_target = thermo.bowen_root(system, pot, m, workers=workers, budget=budget)
    tree = CantorTree(system, pot, m, None, 0, [blocks], s_target, s_target, node_budget=node_budget)
    root = tree.add_node((), 0, "root", None)
    tree.generations.append([root.index])
    leaves = _grow_blocks(tree, root, blocks, budget) if blocks else [root]
    tree.generations.append([n.index for n in leaves])
    return tree


def _m_conditions(system: IfsSystem, pot: Potential, m: int, eps: float, s_target: float,
                  s_reference: Optional[float], workers: int, budget: int) -> Dict[str, bool]:
    log_rho = math.log(system.rho)
    log_k = math.log(system.K)
    # the running average of Var_k is nonincreasing, so a depth <= m means the bound holds at m
    tempered = potentials.tempered_depth(system, pot, eps, n_max=m, workers=workers, budget=budget) is not None
    level = thermo.PartitionLevel.build(system, pot, m, workers, budget)
    worst = max(float(c.max()) for c in level.chunks)
    flags = {
        "tempered": tempered,
        "near_dimension": s_reference is not None and abs(s_target - s_reference) < eps,
        "weight_margin": worst * 4.0 * eps / -log_rho <= -2.0 * log_k - 3.0 * m * eps,
        "distortion_absorbed": m * eps >= 2.0 * log_k,
    }
    for name, held in flags.items():
        if not held:
            logger.warning(f"Condition {name} does not hold at m={m}, eps={eps}; recorded, construction continues")
    return flags


def _reference_dimension(system: IfsSystem, pot: Potential, m: int, s_target: float,
                         workers: int, budget: int) -> Optional[float]:
    try:
        s_double = thermo.bowen_root(system, pot, 2 * m, workers=workers, budget=budget)
    except BudgetExceeded:
        logger.warning(f"Depth {2 * m} is over budget; s(f) reference falls back to s_{m}(f)")
        return None
    return thermo.bowen_extrapolate([(m, s_target), (2 * m, s_double)])


def build_levels(system: IfsSystem, pot: Potential, m: int, eps: float, k_max: int,
                 blocks: Union[int, Sequence[int]] = 1, budget: int = ifs_core.DEFAULT_BUDGET,
                 node_budget: int = DEFAULT_NODE_BUDGET, s_reference: Optional[float] = None,
                 workers: int = 1) -> CantorTree:
    pot.check_compatible(system)
    if not pot.is_strictly_positive(system):
        raise ValidationError(f"build_levels needs a strictly positive potential, got {pot.descriptor}")
    if m < 1 or k_max < 0 or eps <= 0:
        raise ValidationError("need m >= 1, k_max >= 0 and eps > 0")
    schedule = [int(blocks)] * k_max if isinstance(blocks, int) else [int(b) for b in blocks]
    if len(schedule) < k_max or any(b < 1 for b in schedule[:k_max]):
        raise ValidationError(f"block schedule {schedule} must give ell_k >= 1 for every generation up to {k_max}")
    schedule = schedule[:k_max]

    s_target = thermo.bowen_root(system, pot, m, workers=workers, budget=budget)
    if s_reference is None:
        s_reference = _reference_dimension(system, pot, m, s_target, workers, budget)
    if eps >= 0.5 * min(s_reference or s_target, -math.log(system.rho)):
        logger.warning(f"eps={eps} is not below half of min(s(f), -log rho)")

    tree = CantorTree(system, pot, m, eps, k_max, schedule, s_target, s_reference, node_budget=node_budget)
    tree.flags = _m_conditions(system, pot, m, eps, s_target, s_reference, workers, budget)
    root = tree.add_node((), 0, "root", None)
    tree.generations.append([root.index])

    norm = pot.sup_norm(system)
    log_rho = math.log(system.rho)
    gap_bound = root_gap_bound(m, eps, system.K, system.rho) if tree.flags["weight_margin"] else None
    frontier = [root]
    for k, ell in enumerate(schedule, start=1):
        m_k = ell * m
        tree.growth.append(_growth_holds(system, k, m_k, eps, norm, max(n.depth for n in frontier)))
        new_leaves: List[TreeNode] = []
        for leaf in frontier:
            for node in _grow_blocks(tree, leaf, ell, budget):
                new_leaves.append(_attach_suffix(tree, node, k, norm, log_rho))
        _check_disjoint(new_leaves)
        tree.generations.append([n.index for n in new_leaves])
        frontier = new_leaves
        logger.info(f"Generation {k}: {len(new_leaves)} leaves, depths "
                    f"{min(n.depth for n in new_leaves)}..{max(n.depth for n in new_leaves)}")

    if gap_bound is not None:
        for node in tree.nodes:
            if node.s_local is not None and s_target - node.s_local > gap_bound + ROOT_SLACK:
                raise InvariantViolation(f"s_m - s_(m,v) = {s_target - node.s_local:.6g} exceeds C eps = {gap_bound:.6g}")
    else:
        logger.warning("Upper bound s_m(f) - s_(m,v) <= C eps skipped: depth-m weight condition fails")
    tree.diagnostics = _diameter_diagnostic(tree, eps, log_rho)
    return tree


def _growth_holds(system: IfsSystem, k: int, m_k: int, eps: float, norm: float, previous_depth: int) -> bool:
    if k == 1:
        n0 = max(1, math.ceil(math.log(4.0 * system.K) / -math.log(system.eta)))
        held = m_k >= n0 + 1 and n0 + norm <= m_k * eps
    else:
        held = m_k / k >= previous_depth and previous_depth * (1.0 + norm) <= m_k * eps
    if not held:
        logger.warning(f"Growth condition on m_{k}={m_k} does not hold; recorded")
    return held


def _attach_suffix(tree: CantorTree, node: TreeNode, k: int, norm: float, log_rho: float) -> TreeNode:
    system, pot = tree.system, tree.potential
    witness = witness_cylinder(system, pot, node.word)
    t_bound = node.depth * norm / -log_rho + 1.0
    if witness.t > t_bound + 1e-9:
        raise InvariantViolation(f"return depth {witness.t} above its bound {t_bound:.6g} for {node.word}")
    if system.is_affine:
        span = jn_exact_interval(system, pot, node.word, witness.radius)
        if not span.contains_interval(witness.lo, witness.hi):
            raise InvariantViolation(f"leaf under {node.word} is not inside J_n(w)")
    return tree.add_node(node.word + witness.suffix, k, "suffix", node.index, t=witness.t)


def _diameter_diagnostic(tree: CantorTree, eps: float, log_rho: float) -> Dict[str, float]:
    power = 1.0 + 4.0 * eps / -log_rho
    violations, checked = 0, 0
    for leaf in tree.leaves():
        log_product, index = 0.0, leaf.index
        while index is not None:
            node = tree.nodes[index]
            if node.kind == "block":
                log_product += node.log_base
            index = node.parent
        checked += 1
        if math.log(float(leaf.diameter)) < power * log_product:
            violations += 1
    if violations and tree.flags.get("weight_margin") and tree.flags.get("distortion_absorbed"):
        logger.warning(f"{violations} of {checked} leaves fall below the product diameter bound")
    return {"leaves_checked": checked, "diameter_bound_violations": violations}


# --- Mass ---

@dataclass(frozen=True)
class MeasureNode:
    word: Word
    kind: str
    mass: float
    lo: Number
    hi: Number
    node: Optional[int] = None

    @property
    def depth(self) -> int:
        return len(self.word)

    @property
    def diameter(self) -> Number:
        return self.hi - self.lo


def assign_measure(tree: CantorTree) -> List[MeasureNode]:
    """Root mass 1, spread over block children by their local-root weights and kept along suffixes."""
    system = tree.system
    masses = {0: 1.0}
    measures: List[MeasureNode] = []
    for node in tree.nodes:
        mass = masses[node.index]
        measures.append(MeasureNode(node.word, node.kind, mass, node.lo, node.hi, node.index))
        if not node.children:
            continue
        children = [tree.nodes[i] for i in node.children]
        if node.selection is not None:
            for child in children:
                masses[child.index] = mass * math.exp(node.s_local * child.log_base)
            prefix_mass: Dict[Word, float] = {}
            for child in children:
                for i in range(1, tree.m):
                    key = child.word[:node.depth + i]
                    prefix_mass[key] = prefix_mass.get(key, 0.0) + masses[child.index]
            for word, value in sorted(prefix_mass.items()):
                rec = ifs_core.cylinder_record(system, word)
                measures.append(MeasureNode(word, "prefix", value, rec.lo, rec.hi))
        else:
            for child in children:
                masses[child.index] = mass
                for i in range(node.depth + 1, child.depth):
                    rec = ifs_core.cylinder_record(system, child.word[:i])
                    measures.append(MeasureNode(child.word[:i], "stretch", mass, rec.lo, rec.hi))
        residual = abs(math.fsum(masses[c.index] for c in children) - mass)
        if residual > MEASURE_TOL:
            raise InvariantViolation(f"mass of {node.word} is not the sum of its offspring (residual {residual:.3g})")
    return measures


# --- Hoelder check ---

@dataclass(frozen=True)
class HolderRow:
    depth: int
    diameter: float
    mass: float
    local_exponent: Optional[float]
    kind: str


@dataclass
class HolderReport:
    s_eps: float
    start_depth: int
    M: float
    M_ball: float
    min_exponent: Optional[float]
    max_exponent: Optional[float]
    passed: bool
    rows: List[HolderRow]
    ball_rows: List[dict]

    csv_columns = ("depth", "diameter", "mass", "local_exponent")

    def csv_rows(self) -> List[tuple]:
        return [(r.depth, r.diameter, r.mass, r.local_exponent) for r in self.rows]

    def to_dict(self) -> dict:
        return {"s_eps": self.s_eps, "start_depth": self.start_depth, "M": self.M, "M_ball": self.M_ball,
                "min_exponent": self.min_exponent, "max_exponent": self.max_exponent,
                "passed": self.passed, "balls": self.ball_rows,
                "failures": [vars(r) for r in self.rows
                             if r.local_exponent is not None and r.local_exponent < self.s_eps - ROOT_SLACK]}


def holder_check(tree: CantorTree, measures: Sequence[MeasureNode], s_eps: float,
                 start_depth: int = 1) -> HolderReport:
    """Smallest M with mu <= M diam^s_eps over constructed cylinders, plus local exponents and a ball sample."""
    if s_eps <= 0:
        raise ValidationError(f"s_eps must be positive, got {s_eps}")
    if tree.s_reference is not None and s_eps >= tree.s_reference:
        raise ValidationError(f"s_eps={s_eps} must lie below s(f) ~ {tree.s_reference:.6g}")

    M = 0.0
    rows: List[HolderRow] = []
    for mn in sorted(measures, key=lambda x: (x.depth, x.word)):
        diameter = float(mn.diameter)
        if mn.mass <= 0:
            continue
        M = max(M, mn.mass / diameter ** s_eps) if diameter > 0 else math.inf
        exponent = math.log(mn.mass) / math.log(diameter) if 0 < diameter < 1 else None
        if mn.depth >= start_depth:
            rows.append(HolderRow(mn.depth, diameter, mn.mass, exponent, mn.kind))

    exponents = [r.local_exponent for r in rows if r.local_exponent is not None]
    min_exp = min(exponents) if exponents else None
    max_exp = max(exponents) if exponents else None
    passed = math.isfinite(M) and all(e >= s_eps - ROOT_SLACK for e in exponents)
    M_ball, ball_rows = _ball_sample(tree, measures, s_eps, start_depth)
    if not passed:
        logger.warning(f"Hoelder check fails at s_eps={s_eps}: smallest local exponent {min_exp}")
    return HolderReport(s_eps, start_depth, M, M_ball, min_exp, max_exp, passed, rows, ball_rows)


def _ball_sample(tree: CantorTree, measures: Sequence[MeasureNode], s_eps: float,
                 start_depth: int) -> Tuple[float, List[dict]]:
    terminal = sorted((mn for mn in measures if mn.node is not None and not tree.nodes[mn.node].children),
                      key=lambda mn: mn.lo)
    if not terminal:
        return 0.0, []
    los = [float(mn.lo) for mn in terminal]
    his = [float(mn.hi) for mn in terminal]
    cumulative = np.concatenate([[0.0], np.cumsum([mn.mass for mn in terminal])])
    step = max(1, len(terminal) // BALL_SAMPLES)
    worst, rows = 0.0, []
    for leaf in terminal[::step]:
        center = float(leaf.lo + leaf.hi) / 2
        for depth in range(start_depth, leaf.depth + 1):
            radius = float(ifs_core.cylinder_record(tree.system, leaf.word[:depth]).diameter)
            first = bisect.bisect_left(his, center - radius)
            last = bisect.bisect_right(los, center + radius)
            mass = float(cumulative[last] - cumulative[first])
            ratio = mass / (2 * radius) ** s_eps
            worst = max(worst, ratio)
            rows.append({"center": center, "radius": radius, "mass": mass, "ratio": ratio})
    return worst, rows
