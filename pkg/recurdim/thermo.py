# recurdim/thermo.py
"""
Pressure approximants and Bowen roots.

The depth-n partition sum is Z_n(s) = sum_w (D_w e^{-S_n f([w])})^s with
D_w = |phi_w'(x*)|. Every sum is taken in the log domain, chunk by chunk in
first-symbol order, so the value does not depend on the worker count.
"""
import logging
import math
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from recurdim import ifs_core
from recurdim.errors import BracketError, ValidationError
from recurdim.ifs_core import IfsSystem
from recurdim.potentials import Potential

logger = logging.getLogger(__name__)

# --- Defaults ---
DEFAULT_DEPTHS = (4, 6, 8, 10, 12)
DEFAULT_TOL = 1e-12
DEFAULT_DELTA = 1e-3
S_MAX_CAP = 4.0
S_EXPANSION_CAP = 64.0
BRACKET_SLACK = 1e-9


@dataclass(frozen=True)
class PressureSample:
    s: float
    n: int
    value: float


@dataclass(frozen=True)
class BowenSample:
    n: int
    s: float
    residual: float


@dataclass(frozen=True)
class RichardsonStep:
    n_low: int
    n_high: int
    order: str
    value: float


@dataclass
class BowenReport:
    system: dict
    potential: dict
    samples: List[BowenSample]
    extrapolated: float
    richardson: List[RichardsonStep]
    gaps: List[dict]
    pressure_bracket: List[PressureSample]
    bracket_ok: bool
    method: dict
    config: dict = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def roots(self) -> List[Tuple[int, float]]:
        return [(sample.n, sample.s) for sample in self.samples]

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "potential": self.potential,
            "samples": [{"n": x.n, "s_n": x.s, "residual": x.residual} for x in self.samples],
            "extrapolated": self.extrapolated,
            "richardson": [vars(step) for step in self.richardson],
            "gaps": self.gaps,
            "pressure_bracket": [{"s": p.s, "n": p.n, "P": p.value} for p in self.pressure_bracket],
            "bracket_ok": self.bracket_ok,
            "method": self.method,
            "config": self.config,
            "notes": self.notes,
        }


# --- Partition sums ---

class PartitionLevel:
    """Log weights log(D_w) - S_n f([w]) of one depth, chunked by first symbol."""

    def __init__(self, n: int, chunks: List[np.ndarray]):
        self.n = n
        self.chunks = chunks
        self.max_abs = max(float(np.abs(c).max()) for c in chunks)
        self.count = sum(len(c) for c in chunks)

    @classmethod
    def build(cls, system: IfsSystem, pot: Potential, n: int, workers: int = 1,
              budget: int = ifs_core.DEFAULT_BUDGET, sup_weights: bool = False) -> "PartitionLevel":
        pot.check_compatible(system)
        if sup_weights and not (system.is_affine and pot.is_locally_constant(system)):
            logger.warning("Cylinder-sup weights are only exact on affine systems with locally constant potentials")
        chunks = []
        for level in ifs_core.level_chunks(system, n, workers, budget):
            log_d = level.log_sup_derivative if sup_weights else level.log_derivative
            chunks.append(log_d - pot.birkhoff_level(system, level))
        logger.debug(f"Depth {n}: {sum(len(c) for c in chunks)} log weights in {len(chunks)} chunks")
        return cls(n, chunks)

    def log_sum(self, s: float, pool: Optional[Executor] = None) -> float:
        if pool is None:
            parts = [logsumexp(s * c) for c in self.chunks]
        else:
            parts = list(pool.map(lambda c: logsumexp(s * c), self.chunks))
        return float(logsumexp(parts))

    def pressure(self, s: float, pool: Optional[Executor] = None) -> float:
        return self.log_sum(s, pool) / self.n


def default_s_max(system: IfsSystem, pot: Potential) -> float:
    inf_f = max(pot.inf_value(system), 0.0)
    return min(S_MAX_CAP, 1.0 + 1.0 / (1.0 + inf_f / math.log(1.0 / system.rho)))


def solve_partition_root(log_sum, max_abs_log_weight: float, tol: float = DEFAULT_TOL,
                         s_max: float = 1.0) -> Tuple[float, float]:
    """Root of log_sum(s) = 0 on [0, s_max] by bisection, expanding s_max if needed."""
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    g0 = log_sum(0.0)
    if abs(math.expm1(g0)) <= tol:
        return 0.0, abs(math.expm1(g0))
    if g0 < 0:
        raise BracketError("partition sum at s=0 is below 1")
    hi = s_max
    while log_sum(hi) > 0:
        if hi >= S_EXPANSION_CAP:
            raise BracketError(f"partition sum still exceeds 1 at s={hi}; weights do not contract")
        hi = min(2.0 * hi, S_EXPANSION_CAP)
        logger.info(f"Expanding Bowen bracket to s_max={hi}")
    xtol = tol / (1.0 + max_abs_log_weight)
    s = optimize.bisect(log_sum, 0.0, hi, xtol=xtol, maxiter=400)
    return s, abs(math.expm1(log_sum(s)))


# --- Operations ---

def pressure_approx(system: IfsSystem, pot: Potential, s: float, n: int, workers: int = 1,
                    budget: int = ifs_core.DEFAULT_BUDGET, sup_weights: bool = False) -> PressureSample:
    if s < 0:
        raise ValidationError(f"s must be >= 0, got {s}")
    level = PartitionLevel.build(system, pot, n, workers, budget, sup_weights)
    return PressureSample(s, n, level.pressure(s))


def pressure_grid(system: IfsSystem, pot: Potential, s_values: Sequence[float], n: int,
                  workers: int = 1, budget: int = ifs_core.DEFAULT_BUDGET,
                  sup_weights: bool = False) -> List[PressureSample]:
    if any(s < 0 for s in s_values):
        raise ValidationError("s grid must be nonnegative")
    level = PartitionLevel.build(system, pot, n, workers, budget, sup_weights)
    return [PressureSample(float(s), n, level.pressure(float(s))) for s in s_values]


def _solve_level(level: PartitionLevel, tol: float, s_max: float, workers: int) -> BowenSample:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            s, residual = solve_partition_root(lambda x: level.log_sum(x, pool), level.max_abs, tol, s_max)
    else:
        s, residual = solve_partition_root(level.log_sum, level.max_abs, tol, s_max)
    if residual > tol:
        logger.warning(f"Depth {level.n}: partition residual {residual:.3g} exceeds tol {tol:.3g}")
    return BowenSample(level.n, s, residual)


def bowen_root(system: IfsSystem, pot: Potential, n: int, tol: float = DEFAULT_TOL,
               s_max: Optional[float] = None, workers: int = 1,
               budget: int = ifs_core.DEFAULT_BUDGET) -> float:
    """s_n(f): the s where the depth-n partition sum equals 1."""
    level = PartitionLevel.build(system, pot, n, workers, budget)
    return _solve_level(level, tol, s_max or default_s_max(system, pot), workers).s


def _root_map(roots: Iterable[Union[Tuple[int, float], BowenSample]]) -> Dict[int, float]:
    mapping: Dict[int, float] = {}
    for item in roots:
        n, s = (item.n, item.s) if isinstance(item, BowenSample) else (int(item[0]), float(item[1]))
        mapping[n] = s
    return dict(sorted(mapping.items()))


def richardson_steps(roots: Iterable[Union[Tuple[int, float], BowenSample]]) -> List[RichardsonStep]:
    """Extrapolations under s_n = s + c/n (+ d/n^2): doubling pairs, consecutive pairs and triples."""
    table = _root_map(roots)
    ns = list(table)
    steps = [RichardsonStep(n, 2 * n, "doubling", 2.0 * table[2 * n] - table[n])
             for n in ns if 2 * n in table]
    for n1, n2 in zip(ns, ns[1:]):
        steps.append(RichardsonStep(n1, n2, "pair", (n2 * table[n2] - n1 * table[n1]) / (n2 - n1)))
    for n1, n2, n3 in zip(ns, ns[1:], ns[2:]):
        rows = np.array([[n * n, n, 1.0] for n in (n1, n2, n3)], dtype=float)
        rhs = np.array([n * n * table[n] for n in (n1, n2, n3)])
        steps.append(RichardsonStep(n1, n3, "triple", float(np.linalg.solve(rows, rhs)[0])))
    return steps


def bowen_extrapolate(roots: Iterable[Union[Tuple[int, float], BowenSample]]) -> float:
    """2 s_{2n} - s_n for the largest (n, 2n) pair available."""
    table = _root_map(roots)
    pairs = [n for n in table if 2 * n in table]
    if len(table) < 2 or not pairs:
        raise ValidationError(f"insufficient samples for extrapolation: depths {list(table)} contain no (n, 2n) pair")
    n = max(pairs)
    return 2.0 * table[2 * n] - table[n]


def dimension_report(system: IfsSystem, pot: Potential, depths: Sequence[int] = DEFAULT_DEPTHS,
                     tol: float = DEFAULT_TOL, delta: float = DEFAULT_DELTA,
                     s_max: Optional[float] = None, workers: int = 1,
                     budget: int = ifs_core.DEFAULT_BUDGET, config: Optional[dict] = None) -> BowenReport:
    depths = sorted(set(int(n) for n in depths))
    if not depths or depths[0] < 1:
        raise ValidationError(f"depth schedule must hold positive integers, got {depths}")
    s_max = s_max or default_s_max(system, pot)

    samples: List[BowenSample] = []
    deepest: Optional[PartitionLevel] = None
    for n in depths:
        deepest = PartitionLevel.build(system, pot, n, workers, budget)
        samples.append(_solve_level(deepest, tol, s_max, workers))
        logger.info(f"{system.descriptor} / {pot.descriptor}: s_{n} = {samples[-1].s:.12f}")

    extrapolated = bowen_extrapolate(samples)
    table = _root_map(samples)
    gaps = [{"n": n, "2n": 2 * n, "gap": abs(table[2 * n] - table[n])} for n in table if 2 * n in table]

    bracket = [PressureSample(max(extrapolated - delta, 0.0), deepest.n, deepest.pressure(max(extrapolated - delta, 0.0))),
               PressureSample(extrapolated + delta, deepest.n, deepest.pressure(extrapolated + delta))]
    bracket_ok = bracket[0].value >= -BRACKET_SLACK and bracket[1].value <= BRACKET_SLACK
    if not bracket_ok:
        logger.warning(f"Pressure at s={extrapolated:.6g} +/- {delta} does not bracket 0 at depth {deepest.n}: "
                       f"{bracket[0].value:.3g}, {bracket[1].value:.3g}")

    return BowenReport(
        system=system.to_dict(), potential=pot.to_dict(), samples=samples,
        extrapolated=extrapolated, richardson=richardson_steps(samples), gaps=gaps,
        pressure_bracket=bracket, bracket_ok=bracket_ok,
        method={"root": "bisection", "tol": tol, "s_max": s_max, "delta": delta,
                "extrapolation": "richardson 2*s_2n - s_n", "representative": "periodic point"},
        config=dict(config or {}),
    )


def truncation_sweep(amax_values: Sequence[int], pot: Potential, n: int, tol: float = DEFAULT_TOL,
                     workers: int = 1, budget: int = ifs_core.DEFAULT_BUDGET) -> List[Tuple[int, float]]:
    """s_n for the continued-fraction subsystems cf:amax=a, a in amax_values."""
    results = []
    for amax in sorted(amax_values):
        system = ifs_core.build_system(f"cf:amax={amax}")
        results.append((amax, bowen_root(system, pot, n, tol, workers=workers, budget=budget)))
    return results
