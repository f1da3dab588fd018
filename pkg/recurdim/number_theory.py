# recurdim/number_theory.py
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import mpmath
from scipy import optimize

from recurdim import ifs_core
from recurdim.errors import BudgetExceeded, InvariantViolation, ValidationError
from recurdim.ifs_core import BranchSpec, IfsSystem, Number
from recurdim.potentials import Potential
from recurdim.recurrence import RecurrenceWitness, recurrence_distance, witness_cylinder

logger = logging.getLogger(__name__)

# --- Constants ---
DEFAULT_DPS = 50
ROOT_RESIDUAL_TOL = 1e-14
THRESHOLD_WINDOW = 1e-9
PERIODS_CHECKED = 2
DTAU_THEOREM_MIN_TAU = 2.0


# --- Rational continued fractions ---

def cf_expansions_of_rational(p: int, q: int) -> Tuple[List[int], List[int]]:
    """The two finite expansions of p/q: one ending in a digit >= 2, one ending in 1."""
    p, q = int(p), int(q)
    if not 1 <= p < q:
        raise ValidationError(f"{p}/{q} is not in (0, 1)")
    if math.gcd(p, q) != 1:
        raise ValidationError(f"{p}/{q} is not reduced")
    digits = []
    num, den = q, p
    while den:
        a, rem = divmod(num, den)
        digits.append(a)
        num, den = den, rem
    return digits, digits[:-1] + [digits[-1] - 1, 1]


def evaluate_cf(word: Sequence[int]) -> Fraction:
    """[a_1, ..., a_n] as an exact rational."""
    if not word:
        raise ValidationError("continued fraction needs at least one digit")
    value = Fraction(0)
    for a in reversed(word):
        value = 1 / (a + value)
    return value


def convergent_matrix(word: Sequence[int]) -> Tuple[int, int, int, int]:
    """(p_{n-1}, p_n, q_{n-1}, q_n) as the composed Moebius matrix of the word."""
    m = ifs_core.IDENTITY
    for a in word:
        m = ifs_core.compose(m, BranchSpec.moebius(a).matrix())
    return tuple(int(x) for x in m)


# --- Quadratic surds ---

@dataclass(frozen=True)
class QuadraticSurd:
    """Root in [0, 1] of a x^2 + b x + c = 0 with purely periodic continued fraction."""
    a: int
    b: int
    c: int
    root: float
    period: Tuple[int, ...]
    p: int
    q: int

    @property
    def triple(self) -> Tuple[int, int, int]:
        return self.a, self.b, self.c

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def value(self, dps: int = DEFAULT_DPS) -> mpmath.mpf:
        with mpmath.workdps(dps):
            sqrt_d = mpmath.sqrt(self.discriminant)
            if self.b > 0:
                return -2 * mpmath.mpf(self.c) / (self.b + sqrt_d)
            return (sqrt_d - self.b) / (2 * self.a)

    def to_dict(self) -> dict:
        return {"A": self.a, "B": self.b, "C": self.c, "root": self.root,
                "period": list(self.period), "p": self.p, "q": self.q}


def _normalized_triple(a: int, b: int, c: int) -> Tuple[int, int, int]:
    g = math.gcd(math.gcd(a, b), c)
    if a < 0:
        g = -g
    return a // g, b // g, c // g


def _at_least(P: int, D: int, Q: int, k: int) -> bool:
    """(P + sqrt D) / Q >= k, decided in integers."""
    y = k * Q - P
    if Q > 0:
        return y < 0 or y * y <= D
    return y >= 0 and y * y >= D


def _surd_floor(P: int, D: int, Q: int) -> int:
    k = math.floor((P + math.isqrt(D)) / Q)
    while not _at_least(P, D, Q, k):
        k -= 1
    while _at_least(P, D, Q, k + 1):
        k += 1
    return k


def surd_digits(a: int, b: int, c: int, count: int) -> List[int]:
    """First `count` partial quotients of the positive root of a x^2 + b x + c, which must lie in (0, 1)."""
    D = b * b - 4 * a * c
    if D <= 0 or math.isqrt(D) ** 2 == D:
        raise InvariantViolation(f"discriminant {D} of ({a}, {b}, {c}) does not give a quadratic irrational")
    P, Q = -b, 2 * a
    if _surd_floor(P, D, Q) != 0:
        raise InvariantViolation(f"root of ({a}, {b}, {c}) is not in (0, 1)")
    # x = (P + sqrt D)/Q with Q | D - P^2; 1/x = (-P + sqrt D) / ((D - P^2)/Q)
    P, Q = -P, (D - P * P) // Q
    digits = []
    for _ in range(count):
        k = _surd_floor(P, D, Q)
        digits.append(k)
        P = k * Q - P
        Q = (D - P * P) // Q
    return digits


def _positive_root(a: int, b: int, c: int) -> float:
    """Larger root of a x^2 + b x + c (a > 0), without cancellation when |b| >> |ac|."""
    sqrt_d = math.sqrt(b * b - 4 * a * c)
    if b > 0:
        return -2.0 * c / (b + sqrt_d)
    return (sqrt_d - b) / (2.0 * a)


def surd_from_period(period: Sequence[int], p: Optional[int] = None, q: Optional[int] = None) -> QuadraticSurd:
    """[(a_1, ..., a_n)^inf] as the fixed point of the composed Moebius map."""
    period = tuple(int(a) for a in period)
    if not period or min(period) < 1:
        raise ValidationError(f"period {list(period)} must be a nonempty word of positive digits")
    pm1, pn, qm1, qn = convergent_matrix(period)
    a, b, c = _normalized_triple(qm1, qn - pm1, -pn)
    root = _positive_root(a, b, c)
    if not 0.0 <= root <= 1.0:
        raise InvariantViolation(f"period {list(period)} gives root {root} outside [0, 1]")
    if abs(a * root * root + b * root + c) > ROOT_RESIDUAL_TOL * (abs(a) + abs(b) + abs(c)):
        raise InvariantViolation(f"root {root} misses its quadratic ({a}, {b}, {c})")
    expected = list(period) * PERIODS_CHECKED
    if surd_digits(a, b, c, len(expected)) != expected:
        raise InvariantViolation(f"continued fraction of ({a}, {b}, {c}) is not purely periodic with {list(period)}")
    if p is None:
        p, q = pn, qn
    return QuadraticSurd(a, b, c, root, period, int(p), int(q))


def induced_quadratics(p: int, q: int) -> Tuple[QuadraticSurd, QuadraticSurd]:
    word1, word2 = cf_expansions_of_rational(p, q)
    return surd_from_period(word1, p, q), surd_from_period(word2, p, q)


@dataclass(frozen=True)
class AqSet:
    q: int
    members: Tuple[QuadraticSurd, ...]

    csv_columns = ("q", "p", "period", "A", "B", "C", "root")

    def __len__(self) -> int:
        return len(self.members)

    def csv_rows(self) -> List[tuple]:
        return [(self.q, s.p, " ".join(map(str, s.period)), s.a, s.b, s.c, repr(s.root)) for s in self.members]

    def to_dict(self) -> dict:
        return {"q": self.q, "size": len(self.members), "members": [s.to_dict() for s in self.members]}


@lru_cache(maxsize=1024)
def enumerate_Aq(q: int) -> AqSet:
    """Surds induced by p/q over reduced p, deduplicated by coefficient triple."""
    if q < 1:
        raise ValidationError(f"q must be >= 1, got {q}")
    members = {}
    for p in range(1, q):
        if math.gcd(p, q) != 1:
            continue
        for surd in induced_quadratics(p, q):
            members.setdefault(surd.triple, surd)
    if len(members) > 2 * q:
        raise InvariantViolation(f"|A_{q}| = {len(members)} exceeds 2q")
    return AqSet(q, tuple(members.values()))


# --- D(tau) scans ---

@dataclass(frozen=True)
class DtauWitness:
    q: int
    distance: float
    threshold: float
    nearest: QuadraticSurd
    refined: bool = False

    def to_dict(self) -> dict:
        return {"q": self.q, "distance": self.distance, "threshold": self.threshold,
                "nearest": self.nearest.to_dict(), "refined": self.refined}


RealLike = Union[float, Fraction, mpmath.mpf, QuadraticSurd]


def _as_mpf(x: RealLike, dps: int) -> mpmath.mpf:
    with mpmath.workdps(dps):
        if isinstance(x, QuadraticSurd):
            return x.value(dps)
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        return mpmath.mpf(x)


def _scan_q(x: RealLike, x_float: float, tau: float, q: int, dps: int) -> Optional[DtauWitness]:
    members = enumerate_Aq(q).members
    if not members:
        return None
    threshold = float(q) ** (-2.0 * (tau + 1.0))
    if isinstance(x, QuadraticSurd):
        for surd in members:
            if surd.triple == x.triple:
                return DtauWitness(q, 0.0, threshold, surd)
    nearest = min(members, key=lambda s: abs(x_float - s.root))
    distance = abs(x_float - nearest.root)
    if abs(distance - threshold) > THRESHOLD_WINDOW:
        return DtauWitness(q, distance, threshold, nearest) if distance < threshold else None
    with mpmath.workdps(dps):
        xv = _as_mpf(x, dps)
        gaps = [(abs(xv - s.value(dps)), s) for s in members]
        exact_distance, nearest = min(gaps, key=lambda g: g[0])
        exact_threshold = mpmath.mpf(q) ** (-2 * (mpmath.mpf(tau) + 1))
        if exact_distance < exact_threshold:
            return DtauWitness(q, float(exact_distance), float(exact_threshold), nearest, refined=True)
    return None


def dtau_membership(x: RealLike, tau: float, q_max: int, workers: int = 1,
                    budget: int = ifs_core.DEFAULT_BUDGET, dps: int = DEFAULT_DPS) -> List[DtauWitness]:
    """All q <= q_max with d(x, A_q) < q^{-2(tau+1)}. A finite scan, not a membership proof."""
    if tau < 0:
        raise ValidationError(f"tau must be >= 0, got {tau}")
    if q_max < 1:
        raise ValidationError(f"q_max must be >= 1, got {q_max}")
    if q_max * q_max > budget:
        raise BudgetExceeded(f"scanning A_q up to q={q_max} needs about {q_max * q_max} surds, budget is {budget}")
    x_float = x.root if isinstance(x, QuadraticSurd) else float(x)
    if not 0.0 <= x_float <= 1.0:
        raise ValidationError(f"x must lie in [0, 1], got {x_float}")

    qs = range(1, q_max + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            found = list(pool.map(lambda q: _scan_q(x, x_float, tau, q, dps), qs))
    else:
        found = [_scan_q(x, x_float, tau, q, dps) for q in qs]
    witnesses = [w for w in found if w is not None]
    logger.info(f"D(tau) scan of x={x_float:.12g}, tau={tau}: {len(witnesses)} witnesses for q <= {q_max}")
    return witnesses


# --- Checks along the recurrence witnesses ---

@dataclass
class ProofChainReport:
    amax: int
    tau: float
    eps: float
    word: Tuple[int, ...]
    q: int
    x0: float
    radius: float
    rows: List[dict] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(all(row["checks"].values()) for row in self.rows)

    def to_dict(self) -> dict:
        return {"amax": self.amax, "tau": self.tau, "eps": self.eps, "word": list(self.word),
                "q": self.q, "x0": self.x0, "radius": self.radius, "rows": self.rows, "holds": self.holds}


def proof_chain(amax: int, tau: float, eps: float, word: Sequence[int], dps: int = DEFAULT_DPS) -> ProofChainReport:
    """Evaluates the inequality chain tying a recurrence witness of cf:amax under (tau+eps) log|T'| to A_{q_n}."""
    if tau < 0 or eps <= 0:
        raise ValidationError("need tau >= 0 and eps > 0")
    system = ifs_core.build_system(f"cf:amax={amax}")
    pot = Potential.logderiv(tau + eps)
    witness = witness_cylinder(system, pot, word)
    q = convergent_matrix(witness.word)[3]
    if q < 2:
        raise ValidationError(f"word {list(witness.word)} has q_n = {q}; the chain needs q_n >= 2")
    x0 = surd_from_period(witness.word)
    members = enumerate_Aq(q).members
    report = ProofChainReport(amax, tau, eps, witness.word, q, x0.root, float(witness.radius))
    with mpmath.workdps(dps):
        r = _as_mpf(witness.radius if isinstance(witness.radius, Fraction) else float(witness.radius), dps)
        x0_value = x0.value(dps)
        cap = mpmath.mpf(q) ** (-2 * (1 + mpmath.mpf(tau)))
        for label, x in (("lo", witness.lo), ("hi", witness.hi), ("mid", witness.cylinder.midpoint)):
            xv = _as_mpf(x, dps)
            shift = _as_mpf(recurrence_distance(system, witness.word, x), dps)
            to_x0 = abs(xv - x0_value)
            to_aq = min(abs(xv - s.value(dps)) for s in members)
            checks = {
                "return_below_radius": bool(shift < r),
                "near_periodic_point": bool(to_x0 <= r / (q * q - 1)),
                "aq_within_x0": bool(to_aq <= to_x0),
                "aq_within_cap": bool(to_aq <= cap),
            }
            report.rows.append({"point": label, "x": float(xv), "shift": float(shift), "to_x0": float(to_x0),
                                "to_aq": float(to_aq), "cap": float(cap), "checks": checks})
    if not report.holds:
        logger.warning(f"Inequality chain fails for word {list(witness.word)}")
    return report


@dataclass
class MahlerCheck:
    n: int
    threshold: Number
    rows: List[dict]

    @property
    def holds(self) -> bool:
        return all(row["holds"] for row in self.rows)

    def to_dict(self) -> dict:
        return {"n": self.n, "threshold": float(self.threshold), "rows": self.rows, "holds": self.holds}


def mahler_check(system: IfsSystem, witness: RecurrenceWitness, t: float) -> MahlerCheck:
    """On a b-adic-slope system, ||(b^n - 1) x|| <= |T^n x - x| < b^{-tn} at the witness points."""
    b = system.base
    if not system.is_affine or any(br.slope != Fraction(1, b) for br in system.branches):
        raise ValidationError(f"{system.descriptor} is not a system of slope 1/{b} branches")
    n = len(witness.word)
    threshold: Number = Fraction(1, b ** int(t * n)) if float(t * n).is_integer() else float(b) ** (-t * n)
    rows = []
    for x in (witness.lo, witness.hi, witness.cylinder.midpoint):
        y = (b ** n - 1) * x
        to_integer = abs(y - round(y))
        shift = recurrence_distance(system, witness.word, x)
        rows.append({"x": float(x), "norm": float(to_integer), "shift": float(shift),
                     "holds": to_integer <= shift < threshold})
    return MahlerCheck(n, threshold, rows)


# --- Closed forms ---

def _dyadic_frequency_root(t: float) -> float:
    if t == 0:
        return 1.0
    return optimize.brentq(lambda s: 2.0 ** (s * (t + 1)) - 1.0 - 2.0 ** (t * s), 1e-12, 1.0, xtol=1e-15)


def closed_form_dimension(case: str, **params) -> float:
    t = float(params.get("t", 0.0))
    if case == "badic-const":
        return 1.0 / (1.0 + t)
    if case == "cantor-const":
        k, b = int(params.get("k", 2)), int(params.get("b", 3))
        return math.log(k) / math.log(b) / (1.0 + t)
    if case == "dyadic-frequency":
        return _dyadic_frequency_root(t)
    if case == "dtau":
        tau = float(params.get("tau", 0.0))
        if tau < DTAU_THEOREM_MIN_TAU:
            logger.warning(f"tau={tau} is below {DTAU_THEOREM_MIN_TAU}; 1/(tau+1) is outside the proven range")
        return 1.0 / (tau + 1.0)
    raise ValidationError(f"unknown closed-form case '{case}'")
