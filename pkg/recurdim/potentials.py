# recurdim/potentials.py
import logging
import math
import sys
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Callable, List, Optional, Sequence

import mpmath
import numpy as np

from recurdim import ifs_core
from recurdim.errors import ValidationError
from recurdim.ifs_core import CylinderLevel, CylinderRecord, IfsSystem, Number, Word

logger = logging.getLogger(__name__)

# --- Constants ---
SAMPLES_PER_CYLINDER = 9
CALLBACK_NORM_GRID = 257
DEFAULT_TEMPERED_DEPTH = 12


class PotentialKind(Enum):
    CONST = "const"
    LOGDERIV = "logderiv"
    DIGITIND = "digitind"
    CALLBACK = "callback"


@dataclass(frozen=True)
class VariationBound:
    n: int
    bound: float
    certified: bool = True


@dataclass(frozen=True)
class Potential:
    """A nonnegative potential f, optionally shifted by a constant (f + shift)."""
    kind: PotentialKind
    value: float = 0.0
    digit: Optional[int] = None
    func: Optional[Callable[[float], float]] = None
    shift: float = 0.0
    descriptor: str = ""

    # --- Constructors ---
    @classmethod
    def const(cls, c: float) -> "Potential":
        return cls._checked(PotentialKind.CONST, float(c), descriptor=f"const:c={c}")

    @classmethod
    def logderiv(cls, t: float) -> "Potential":
        return cls._checked(PotentialKind.LOGDERIV, float(t), descriptor=f"logderiv:t={t}")

    @classmethod
    def digitind(cls, t: float, digit: int) -> "Potential":
        return cls._checked(PotentialKind.DIGITIND, float(t), digit=int(digit),
                            descriptor=f"digitind:t={t},digit={digit}")

    @classmethod
    def callback(cls, func: Callable[[float], float], descriptor: str = "callback") -> "Potential":
        return cls(PotentialKind.CALLBACK, func=func, descriptor=descriptor)

    @classmethod
    def _checked(cls, kind: PotentialKind, value: float, **kwargs) -> "Potential":
        if not math.isfinite(value) or value < 0:
            raise ValidationError(f"potential must be nonnegative, got {kind.value} with {value}")
        return cls(kind, value, **kwargs)

    def plus(self, eps: float) -> "Potential":
        """f + eps."""
        return replace(self, shift=self.shift + float(eps), descriptor=f"{self.descriptor}+{eps}")

    # --- Pointwise ---
    def check_compatible(self, system: IfsSystem) -> None:
        if self.kind is PotentialKind.DIGITIND:
            system.branch(self.digit)
        if self.shift < 0 and self.inf_value(system) < 0:
            raise ValidationError(f"{self.descriptor} takes negative values on {system.descriptor}")

    def is_zero(self) -> bool:
        return self.kind is not PotentialKind.CALLBACK and self.value == 0 and self.shift == 0

    def is_strictly_positive(self, system: IfsSystem) -> bool:
        if self.kind is PotentialKind.LOGDERIV and self.value > 0:
            return True
        return self.inf_value(system) > 0

    def local_value(self, system: IfsSystem, a: int, z: Number) -> float:
        """f at the point phi_a(z), whose first symbol is a."""
        if self.kind is PotentialKind.CONST:
            base = self.value
        elif self.kind is PotentialKind.LOGDERIV:
            base = -self.value * math.log(system.branch(a).deriv(z)) if self.value else 0.0
        elif self.kind is PotentialKind.DIGITIND:
            base = self.value * math.log(system.base) if a == self.digit else 0.0
        else:
            base = float(self.func(float(system.branch(a)(z))))
        return base + self.shift

    # --- Birkhoff sums ---
    def birkhoff_sum(self, system: IfsSystem, word: Sequence[int],
                     record: Optional[CylinderRecord] = None) -> float:
        """S_n f at the periodic representative x* of word."""
        word = system.check_word(word)
        if not word:
            raise ValidationError("birkhoff_sum needs a nonempty word")
        n = len(word)
        if self.kind is PotentialKind.CONST:
            base = n * self.value
        elif self.kind is PotentialKind.LOGDERIV:
            if self.value == 0:
                base = 0.0
            else:
                record = record or ifs_core.cylinder_record(system, word)
                base = -self.value * math.log(record.derivative)
        elif self.kind is PotentialKind.DIGITIND:
            base = self.value * math.log(system.base) * word.count(self.digit)
        else:
            record = record or ifs_core.cylinder_record(system, word)
            base = sum(float(self.func(float(y))) for y in _periodic_orbit(system, word, record.fixed_point))
        return base + n * self.shift

    def birkhoff_sum_at(self, system: IfsSystem, word: Sequence[int], x: Number) -> float:
        """S_n f(x) for a point x of I_n(word)."""
        word = system.check_word(word)
        points = ifs_core.orbit(system, word, x)
        return sum(self.local_value(system, a, points[j + 1]) for j, a in enumerate(word))

    def birkhoff_level(self, system: IfsSystem, level: CylinderLevel) -> np.ndarray:
        n = level.depth
        if self.kind is PotentialKind.CONST:
            base = np.full(level.count, n * self.value)
        elif self.kind is PotentialKind.LOGDERIV:
            base = -self.value * level.log_derivative
        elif self.kind is PotentialKind.DIGITIND:
            counts = (level.words == self.digit).sum(axis=1)
            base = self.value * math.log(system.base) * counts
        else:
            base = np.array([
                sum(float(self.func(y)) for y in _periodic_orbit(system, tuple(int(a) for a in w), float(x)))
                for w, x in zip(level.words, level.fixed_point)
            ])
        return base + n * self.shift

    def radius(self, system: IfsSystem, word: Sequence[int],
               record: Optional[CylinderRecord] = None) -> Number:
        """Recurrence radius e^{-S_n f([w])}, exact where the system allows it."""
        word = system.check_word(word)
        if system.is_affine and self.shift == 0 and float(self.value).is_integer():
            t = int(self.value)
            if self.kind is PotentialKind.CONST and t == 0:
                return Fraction(1)
            if self.kind is PotentialKind.LOGDERIV:
                record = record or ifs_core.cylinder_record(system, word)
                return Fraction(record.derivative) ** t
            if self.kind is PotentialKind.DIGITIND:
                return Fraction(1, system.base ** (t * word.count(self.digit)))
        total = self.birkhoff_sum(system, word, record)
        r = math.exp(-total)
        if r < sys.float_info.min:
            return _radius_below_float_range(total)
        return r

    # --- Norms ---
    def sup_norm(self, system: IfsSystem) -> float:
        if self.kind is PotentialKind.CONST:
            base = self.value
        elif self.kind is PotentialKind.LOGDERIV:
            base = -self.value * math.log(system.eta)
        elif self.kind is PotentialKind.DIGITIND:
            base = self.value * math.log(system.base)
        else:
            base = max(abs(float(self.func(x))) for x in np.linspace(0.0, 1.0, CALLBACK_NORM_GRID))
        return base + self.shift

    def inf_value(self, system: IfsSystem) -> float:
        if self.kind is PotentialKind.CONST:
            base = self.value
        elif self.kind is PotentialKind.LOGDERIV:
            widest = max(ifs_core.branch_derivative_range(b)[1] for b in system.branches)
            base = -self.value * math.log(widest)
        elif self.kind is PotentialKind.DIGITIND:
            base = 0.0
        else:
            base = min(float(self.func(x)) for x in np.linspace(0.0, 1.0, CALLBACK_NORM_GRID))
        return base + self.shift

    def is_locally_constant(self, system: IfsSystem) -> bool:
        """True when S_n f is constant on every n-cylinder."""
        if self.kind in (PotentialKind.CONST, PotentialKind.DIGITIND):
            return True
        return self.kind is PotentialKind.LOGDERIV and (system.is_affine or self.value == 0)

    def to_dict(self) -> dict:
        return {"descriptor": self.descriptor, "kind": self.kind.value, "value": self.value,
                "digit": self.digit, "shift": self.shift}


def _radius_below_float_range(total: float) -> Fraction:
    """e^{-total} as a dyadic rational at double precision, for totals past the float range."""
    man, exp = mpmath.exp(-mpmath.mpf(total)).man_exp
    logger.info(f"Recurrence radius e^-{total:.6g} is below the float range; carried as a rational")
    return Fraction(man) * Fraction(2) ** exp


def _periodic_orbit(system: IfsSystem, word: Word, fixed_point: Number) -> List[Number]:
    """The n points T^j x* of the periodic orbit, built by applying suffix branches to x*."""
    points = [fixed_point]
    y = fixed_point
    for a in reversed(word[1:]):
        y = system.branch(a)(y)
        points.append(y)
    return points


# --- Descriptor parsing ---

def parse_potential(descriptor: str) -> Potential:
    descriptor = descriptor.strip()
    kind, sep, body = descriptor.partition(":")
    if not sep:
        raise ValidationError(f"cannot parse potential descriptor {descriptor!r}")
    fields = {}
    for part in body.split(","):
        if part.strip():
            if "=" not in part:
                raise ValidationError(f"expected key=value in {descriptor!r}")
            key, value = part.split("=", 1)
            fields[key.strip()] = value.strip()
    try:
        if kind == "const":
            pot = Potential.const(float(Fraction(fields["c"])))
        elif kind == "logderiv":
            pot = Potential.logderiv(float(Fraction(fields["t"])))
        elif kind == "digitind":
            pot = Potential.digitind(float(Fraction(fields["t"])), int(fields["digit"]))
        else:
            raise ValidationError(f"unknown potential kind {kind!r}")
    except KeyError as e:
        raise ValidationError(f"potential descriptor {descriptor!r} is missing {e.args[0]}=") from None
    except ValueError:
        raise ValidationError(f"cannot parse numbers in {descriptor!r}") from None
    return replace(pot, descriptor=descriptor)


# --- Module-level operations ---

def birkhoff_sum(system: IfsSystem, pot: Potential, word: Sequence[int]) -> float:
    return pot.birkhoff_sum(system, word)


def variation_bound(system: IfsSystem, pot: Potential, n: int, workers: int = 1,
                    budget: int = ifs_core.DEFAULT_BUDGET) -> VariationBound:
    """Upper bound on the oscillation of f over n-cylinders."""
    if n < 1:
        raise ValidationError(f"variation depth must be >= 1, got {n}")
    if pot.kind in (PotentialKind.CONST, PotentialKind.DIGITIND):
        return VariationBound(n, 0.0, True)
    if pot.kind is PotentialKind.LOGDERIV:
        if pot.value == 0 or system.is_affine:
            return VariationBound(n, 0.0, True)
        if system.is_projective:
            return VariationBound(n, pot.value * _logderiv_oscillation(system, n, workers, budget), True)
    bound = _sampled_oscillation(system, pot, n, budget)
    logger.warning(f"Var_{n}({pot.descriptor}) on {system.descriptor} = {bound:.3g} is sampled, not certified")
    return VariationBound(n, bound, False)


def _logderiv_oscillation(system: IfsSystem, n: int, workers: int, budget: int) -> float:
    # log|T'| on I_n(a w') ranges over -log|phi_a'| on I_{n-1}(w'), monotone between endpoints
    mats = [[float(v) for v in b.matrix()] for b in system.branches]
    worst = 0.0
    for index, chunk in enumerate(ifs_core.level_chunks(system, n, workers, budget)):
        a, b, c, d = mats[index]
        det = abs(a * d - b * c)

        def log_deriv_at_preimage(y):
            u = (d * y - b) / (a - c * y)
            return math.log(det) - 2.0 * np.log(np.abs(c * u + d))

        osc = np.abs(log_deriv_at_preimage(chunk.lo) - log_deriv_at_preimage(chunk.hi))
        worst = max(worst, float(osc.max()))
    return worst


def _sampled_oscillation(system: IfsSystem, pot: Potential, n: int, budget: int) -> float:
    worst = 0.0
    for rec in ifs_core.enumerate_cylinders(system, n, budget):
        lo, hi = float(rec.lo), float(rec.hi)
        values = [pot.local_value(system, rec.word[0], float(system.shift(rec.word[:1], x)))
                  for x in np.linspace(lo, hi, SAMPLES_PER_CYLINDER)]
        worst = max(worst, max(values) - min(values))
    return worst


def tempered_depth(system: IfsSystem, pot: Potential, eps: float, n_max: int = DEFAULT_TEMPERED_DEPTH,
                   workers: int = 1, budget: int = ifs_core.DEFAULT_BUDGET) -> Optional[int]:
    """Smallest n with Var_1 + ... + Var_n <= n*eps, which bounds |S_n f(x) - S_n f(y)| on n-cylinders."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    total = 0.0
    for n in range(1, n_max + 1):
        try:
            total += variation_bound(system, pot, n, workers, budget).bound
        except ifs_core.BudgetExceeded:
            logger.warning(f"Tempered-distortion scan stopped at depth {n}: budget exceeded")
            return None
        if total <= n * eps:
            return n
    logger.warning(f"Tempered-distortion depth for eps={eps} not reached by n={n_max}")
    return None
