# recurdim/recurrence.py
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from recurdim import ifs_core
from recurdim.errors import InvariantViolation, ValidationError
from recurdim.ifs_core import CylinderRecord, IfsSystem, Number, Word
from recurdim.potentials import Potential
from recurdim.thermo import PartitionLevel

logger = logging.getLogger(__name__)

# --- Constants ---
MAX_RETURN_DEPTH = 20_000
FLOAT_SLACK = 1e-12
CRITICAL_TOL = 1e-9


@dataclass(frozen=True)
class Span:
    """An interval with open/closed ends; lo > hi means empty."""
    lo: Number
    hi: Number
    lo_open: bool = False
    hi_open: bool = False

    @classmethod
    def empty(cls) -> "Span":
        return cls(Fraction(1), Fraction(0), True, True)

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi or (self.lo == self.hi and (self.lo_open or self.hi_open))

    @property
    def length(self) -> Number:
        return 0 if self.is_empty else self.hi - self.lo

    def contains(self, x: Number) -> bool:
        if self.is_empty:
            return False
        above = x > self.lo if self.lo_open else x >= self.lo
        below = x < self.hi if self.hi_open else x <= self.hi
        return above and below

    def contains_interval(self, lo: Number, hi: Number) -> bool:
        return self.contains(lo) and self.contains(hi)

    def to_dict(self) -> dict:
        if self.is_empty:
            return {"empty": True}
        return {"lo": float(self.lo), "hi": float(self.hi), "lo_open": self.lo_open,
                "hi_open": self.hi_open, "exact": f"{'(' if self.lo_open else '['}{self.lo}, {self.hi}{')' if self.hi_open else ']'}"}


@dataclass(frozen=True)
class RecurrenceWitness:
    word: Word
    t: int
    suffix: Word
    radius: Number
    base: CylinderRecord
    cylinder: CylinderRecord
    lower_bound: float

    @property
    def lo(self) -> Number:
        return self.cylinder.lo

    @property
    def hi(self) -> Number:
        return self.cylinder.hi

    @property
    def diameter(self) -> Number:
        return self.cylinder.diameter

    def to_dict(self) -> dict:
        return {"word": list(self.word), "t": self.t, "suffix": list(self.suffix),
                "radius": float(self.radius), "interval": [float(self.lo), float(self.hi)],
                "diameter": float(self.diameter), "lower_bound": self.lower_bound}


def periodic_prefix(word: Sequence[int], t: int) -> Word:
    """First t symbols of word^infinity."""
    word = tuple(word)
    if not word:
        raise ValidationError("periodic word needs a nonempty period")
    reps = -(-t // len(word))
    return (word * reps)[:t]


def return_depth(system: IfsSystem, word: Sequence[int], r: Number) -> int:
    """The unique t >= 1 with |I_t(w^inf)| < r <= |I_{t-1}(w^inf)|."""
    word = system.check_word(word)
    if not word:
        raise ValidationError("return_depth needs a nonempty word")
    if not 0 < r <= 1:
        raise ValidationError(f"recurrence radius must lie in (0, 1], got {float(r)}")
    matrix = ifs_core.IDENTITY if system.is_projective else None
    for t in range(1, MAX_RETURN_DEPTH + 1):
        a = word[(t - 1) % len(word)]
        if matrix is not None:
            matrix = ifs_core.compose(matrix, system.branch(a).matrix())
            diameter = abs(ifs_core.apply_matrix(matrix, ifs_core.F1) - ifs_core.apply_matrix(matrix, ifs_core.F0))
        else:
            diameter = ifs_core.cylinder_record(system, periodic_prefix(word, t)).diameter
        if diameter < r:
            return t
    raise InvariantViolation(f"no return depth below {MAX_RETURN_DEPTH} for radius {float(r)}")


def recurrence_distance(system: IfsSystem, word: Sequence[int], x: Number) -> Number:
    """|T^n x - x| for x in I_n(word)."""
    return abs(system.shift(word, x) - x)


def witness_cylinder(system: IfsSystem, pot: Potential, word: Sequence[int]) -> RecurrenceWitness:
    word = system.check_word(word)
    if not word:
        raise ValidationError("witness_cylinder needs a nonempty word")
    base = ifs_core.cylinder_record(system, word)
    r = pot.radius(system, word, base)
    t = return_depth(system, word, r)
    suffix = periodic_prefix(word, t)
    cylinder = ifs_core.cylinder_record(system, word + suffix)

    exact = system.is_projective and isinstance(r, Fraction)
    slack = 0 if exact else FLOAT_SLACK
    for x in (cylinder.lo, cylinder.hi, cylinder.midpoint):
        distance = recurrence_distance(system, word, x)
        if not distance < r + slack:
            raise InvariantViolation(
                f"witness of {word}: |T^n x - x| = {float(distance):.6g} >= r = {float(r):.6g} at x = {float(x)}")

    lower = float(base.diameter) * float(r) * system.eta / system.K
    if float(cylinder.diameter) < lower * (1 - FLOAT_SLACK):
        raise InvariantViolation(
            f"witness of {word}: diameter {float(cylinder.diameter):.6g} below K^-1 eta r |I_n| = {lower:.6g}")
    return RecurrenceWitness(word, t, suffix, r, base, cylinder, lower)


def jn_exact_interval(system: IfsSystem, pot: Potential, word: Sequence[int],
                      radius: Optional[Number] = None) -> Span:
    """J_n(w) = {x in I_n(w): |T^n x - x| < r}, solved exactly on affine systems."""
    if not system.is_affine:
        raise ValidationError(f"exact J_n(w) needs an affine system, got {system.descriptor}")
    base = ifs_core.cylinder_record(system, word)
    r = Fraction(radius if radius is not None else pot.radius(system, base.word, base))
    if r <= 0:
        return Span.empty()
    slope = base.matrix[0]
    # T^n x = sigma x + beta with sigma = 1/slope; |(sigma - 1)(x - x*)| < r
    half = r / abs(1 / slope - 1)
    left, right = base.fixed_point - half, base.fixed_point + half
    return Span(max(base.lo, left), min(base.hi, right), left >= base.lo, right <= base.hi)


def embedding_check(system: IfsSystem, pot: Potential, word: Sequence[int], eps: float) -> bool:
    """A witness built for f + eps also satisfies the recurrence inequality for f."""
    witness = witness_cylinder(system, pot.plus(eps), word)
    r = pot.radius(system, witness.word, witness.base)
    slack = 0 if isinstance(r, Fraction) else FLOAT_SLACK
    return all(recurrence_distance(system, witness.word, x) < r + slack
               for x in (witness.lo, witness.hi, witness.cylinder.midpoint))


# --- Covering series ---

@dataclass(frozen=True)
class CoveringRow:
    n: int
    word_count: int
    s: float
    log_contribution: float
    log_contribution_2k: float
    log_partial_sum: float


@dataclass
class CoveringReport:
    system: dict
    potential: dict
    N: int
    M: int
    s_grid: List[float]
    rows: List[CoveringRow]
    slopes: Dict[float, float]
    classification: Dict[float, str]
    critical_exponent: Optional[float]
    level_critical_exponent: Optional[float]
    constants: dict
    config: dict = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    csv_columns = ("n", "word_count", "s", "log_contribution")

    def csv_rows(self) -> List[tuple]:
        return [(r.n, r.word_count, r.s, r.log_contribution) for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "system": self.system, "potential": self.potential, "N": self.N, "M": self.M,
            "s_grid": self.s_grid,
            "rows": [vars(r) for r in self.rows],
            "per_s": [{"s": s, "slope": self.slopes[s], "regime": self.classification[s]} for s in self.s_grid],
            "critical_exponent": self.critical_exponent,
            "level_critical_exponent": self.level_critical_exponent,
            "constants": self.constants, "config": self.config, "notes": self.notes,
        }


def _zero_crossing(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    for (x1, y1), (x2, y2) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        if y1 == 0:
            return x1
        if (y1 > 0) != (y2 > 0):
            return x1 + (x2 - x1) * y1 / (y1 - y2)
    return xs[-1] if ys and ys[-1] == 0 else None


def covering_report(system: IfsSystem, pot: Potential, N: int, M: int, s_grid: Sequence[float],
                    workers: int = 1, budget: int = ifs_core.DEFAULT_BUDGET,
                    tol: float = CRITICAL_TOL, config: Optional[dict] = None) -> CoveringReport:
    """Per-depth covering sums sum_w (c K D_w r_w)^s of J_n(w) bounds, with c = 4 (and c = 2 reported)."""
    if not 1 <= N <= M:
        raise ValidationError(f"need 1 <= N <= M, got N={N}, M={M}")
    s_grid = sorted(float(s) for s in s_grid)
    if not s_grid or s_grid[0] < 0:
        raise ValidationError("s grid must be nonempty and nonnegative")
    ifs_core.check_budget(system, M, budget)

    log4k, log2k = math.log(4 * system.K), math.log(2 * system.K)
    contributions: Dict[float, List[float]] = {s: [] for s in s_grid}
    rows: List[CoveringRow] = []
    ns = list(range(N, M + 1))
    for n in ns:
        level = PartitionLevel.build(system, pot, n, workers, budget)
        for s in s_grid:
            base = level.log_sum(s)
            contributions[s].append(s * log4k + base)
            partial = float(logsumexp(contributions[s]))
            rows.append(CoveringRow(n, level.count, s, s * log4k + base, s * log2k + base, partial))

    slopes: Dict[float, float] = {}
    classification: Dict[float, str] = {}
    for s in s_grid:
        values = np.array(contributions[s])
        if len(ns) > 1:
            slope = float(np.polyfit(np.array(ns, dtype=float), values, 1)[0])
        else:
            slope = (values[0] - s * log4k) / ns[0]
        slopes[s] = slope
        classification[s] = "decaying" if slope < -tol else "growing" if slope > tol else "critical"

    critical = _zero_crossing(s_grid, [0.0 if classification[s] == "critical" else slopes[s] for s in s_grid])
    level_critical = _zero_crossing(s_grid, [contributions[s][-1] for s in s_grid])
    if critical is None:
        logger.warning(f"Covering slopes do not change sign on the s grid [{s_grid[0]}, {s_grid[-1]}]")

    return CoveringReport(
        system=system.to_dict(), potential=pot.to_dict(), N=N, M=M, s_grid=s_grid, rows=rows,
        slopes=slopes, classification=classification, critical_exponent=critical,
        level_critical_exponent=level_critical,
        constants={"c": 4, "K": system.K, "log_4K": log4k, "log_2K": log2k},
        config=dict(config or {}),
    )
