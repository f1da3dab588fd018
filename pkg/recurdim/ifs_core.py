# recurdim/ifs_core.py
"""
Finite conformal iterated function systems on [0,1].

A system is an ordered family of monotone contracting inverse branches. Affine
and Moebius branches are carried as 2x2 projective matrices with Fraction
entries, so compositions, cylinder endpoints and affine fixed points are exact.
Callback branches are evaluated numerically.
"""
import itertools
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from recurdim import resources
from recurdim.errors import BudgetExceeded, ValidationError

logger = logging.getLogger(__name__)

# --- Constants ---
DEFAULT_BUDGET = 50_000_000
K_SAMPLE_DEPTH = 8
K_SAMPLE_CAP = 1 << 16
K_SAFETY_FACTOR = 2
CALLBACK_GRID = 33
FIXED_POINT_SLACK = 1e-12

Word = Tuple[int, ...]
Number = Union[Fraction, float]
Matrix = Tuple[Fraction, Fraction, Fraction, Fraction]

F0, F1 = Fraction(0), Fraction(1)
IDENTITY: Matrix = (F1, F0, F0, F1)


class BranchKind(Enum):
    AFFINE = "affine"
    MOEBIUS = "moebius"
    CALLBACK = "callback"


# --- Projective matrix helpers ---

def compose(m1: Matrix, m2: Matrix) -> Matrix:
    """Matrix of m1 o m2."""
    a1, b1, c1, d1 = m1
    a2, b2, c2, d2 = m2
    return (a1 * a2 + b1 * c2, a1 * b2 + b1 * d2, c1 * a2 + d1 * c2, c1 * b2 + d1 * d2)


def apply_matrix(m: Matrix, x: Number) -> Number:
    a, b, c, d = m
    return (a * x + b) / (c * x + d)


def invert_matrix(m: Matrix) -> Matrix:
    a, b, c, d = m
    return (d, -b, -c, a)


def determinant(m: Matrix) -> Fraction:
    a, b, c, d = m
    return a * d - b * c


def matrix_derivative(m: Matrix, x: Number) -> Number:
    """|phi'(x)| for the map with matrix m."""
    a, b, c, d = m
    return abs(determinant(m)) / (c * x + d) ** 2


def _matrix_fixed_point(m: Matrix, lo: Number, hi: Number) -> Number:
    a, b, c, d = m
    if c == 0:
        return b / (d - a)
    # c x^2 + (d - a) x - b = 0, stable form of the quadratic formula
    bq = float(d - a)
    root = math.sqrt(max(float((d - a) ** 2 + 4 * b * c), 0.0))
    qv = -0.5 * (bq + math.copysign(root, bq))
    candidates = [qv / float(c)]
    if qv != 0:
        candidates.append(-float(b) / qv)
    flo, fhi = float(lo), float(hi)
    return min(candidates, key=lambda x: max(flo - x, x - fhi, 0.0))


# --- Branches ---

@dataclass(frozen=True)
class BranchSpec:
    kind: BranchKind
    slope: Optional[Fraction] = None
    offset: Optional[Fraction] = None
    digit: Optional[int] = None
    value: Optional[Callable[[float], float]] = None
    derivative: Optional[Callable[[float], float]] = None
    increasing: bool = True

    @classmethod
    def affine(cls, slope, offset) -> "BranchSpec":
        slope, offset = Fraction(slope), Fraction(offset)
        if slope == 0:
            raise ValidationError("affine branch slope must be nonzero")
        return cls(BranchKind.AFFINE, slope=slope, offset=offset, increasing=slope > 0)

    @classmethod
    def moebius(cls, digit: int) -> "BranchSpec":
        if int(digit) < 1:
            raise ValidationError(f"moebius digit must be >= 1, got {digit}")
        return cls(BranchKind.MOEBIUS, digit=int(digit), increasing=False)

    @classmethod
    def callback(cls, value: Callable[[float], float], derivative: Callable[[float], float],
                 increasing: bool = True) -> "BranchSpec":
        return cls(BranchKind.CALLBACK, value=value, derivative=derivative, increasing=increasing)

    def matrix(self) -> Optional[Matrix]:
        if self.kind is BranchKind.AFFINE:
            return (self.slope, self.offset, F0, F1)
        if self.kind is BranchKind.MOEBIUS:
            return (F0, F1, F1, Fraction(self.digit))
        return None

    def __call__(self, x: Number) -> Number:
        m = self.matrix()
        if m is not None:
            return apply_matrix(m, x)
        return self.value(float(x))

    def deriv(self, x: Number) -> Number:
        m = self.matrix()
        if m is not None:
            return matrix_derivative(m, x)
        return abs(self.derivative(float(x)))

    def inverse(self, y: Number) -> Number:
        m = self.matrix()
        if m is not None:
            return apply_matrix(invert_matrix(m), y)
        return optimize.brentq(lambda x: self.value(x) - float(y), 0.0, 1.0, xtol=1e-15)


@dataclass(frozen=True)
class CylinderRecord:
    """The cylinder I_n(w) together with its periodic representative."""
    word: Word
    lo: Number
    hi: Number
    derivative: Number
    fixed_point: Number
    matrix: Optional[Matrix] = None
    exact: bool = False

    @property
    def depth(self) -> int:
        return len(self.word)

    @property
    def diameter(self) -> Number:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Number:
        return (self.lo + self.hi) / 2


# --- The system ---

@dataclass(frozen=True, eq=False)
class IfsSystem:
    descriptor: str
    branches: Tuple[BranchSpec, ...]
    labels: Tuple[int, ...]
    base: int
    rho: float
    eta: float
    K: float
    K_certified: bool = True
    contraction_depth: int = 1
    _index: Dict[int, int] = field(default_factory=dict, repr=False)
    _eta_cache: Dict[int, Number] = field(default_factory=dict, repr=False)

    @property
    def alphabet_size(self) -> int:
        return len(self.branches)

    @property
    def is_affine(self) -> bool:
        return all(b.kind is BranchKind.AFFINE for b in self.branches)

    @property
    def is_projective(self) -> bool:
        return all(b.kind is not BranchKind.CALLBACK for b in self.branches)

    def branch(self, label: int) -> BranchSpec:
        try:
            return self.branches[self._index[label]]
        except KeyError:
            raise ValidationError(f"symbol {label} is not in the alphabet {list(self.labels)}") from None

    def check_word(self, word: Sequence[int]) -> Word:
        word = tuple(int(a) for a in word)
        for a in word:
            self.branch(a)
        return word

    def word_matrix(self, word: Sequence[int]) -> Matrix:
        m = IDENTITY
        for a in word:
            m = compose(m, self.branch(a).matrix())
        return m

    def phi(self, word: Sequence[int], x: Number) -> Number:
        """phi_w(x) = phi_{w_1} o ... o phi_{w_n}(x)."""
        for a in reversed(tuple(word)):
            x = self.branch(a)(x)
        return x

    def phi_derivative(self, word: Sequence[int], x: Number) -> Number:
        """|phi_w'(x)| by the chain rule along the inner orbit."""
        total: Number = 1
        for a in reversed(tuple(word)):
            b = self.branch(a)
            total = total * b.deriv(x)
            x = b(x)
        return total

    def shift(self, word: Sequence[int], y: Number) -> Number:
        """T^n y for y in I_n(word), i.e. phi_w^{-1}(y)."""
        if self.is_projective:
            return apply_matrix(invert_matrix(self.word_matrix(word)), y)
        for a in word:
            y = self.branch(a).inverse(y)
        return y

    def eta_m(self, m: int, budget: int = DEFAULT_BUDGET) -> Number:
        """Smallest diameter among cylinders of depth m."""
        if m not in self._eta_cache:
            self._eta_cache[m] = min(rec.diameter for rec in enumerate_cylinders(self, m, budget))
        return self._eta_cache[m]

    def to_dict(self) -> dict:
        return {
            "descriptor": self.descriptor,
            "alphabet": list(self.labels),
            "rho": self.rho,
            "eta": self.eta,
            "K": self.K,
            "K_certified": self.K_certified,
            "contraction_depth": self.contraction_depth,
        }


# --- Descriptor parsing ---

_AFFINE_PAIR = re.compile(r"\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)")


def _parse_fields(body: str) -> Dict[str, str]:
    fields: Dict[str, str] = {}
    for part in body.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValidationError(f"expected key=value, got {part!r}")
        key, value = part.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields


def _int_field(fields: Dict[str, str], key: str, descriptor: str) -> int:
    if key not in fields:
        raise ValidationError(f"descriptor {descriptor!r} is missing {key}=")
    try:
        return int(fields[key])
    except ValueError:
        raise ValidationError(f"{key} must be an integer in {descriptor!r}") from None


def parse_descriptor(descriptor: str) -> Tuple[List[BranchSpec], List[int], int]:
    """Branches, symbol labels and digit base for a system descriptor."""
    descriptor = descriptor.strip()
    kind, sep, body = descriptor.partition(":")
    if not sep:
        raise ValidationError(f"cannot parse system descriptor {descriptor!r}")
    kind = kind.strip().lower()

    if kind == "badic":
        b = _int_field(_parse_fields(body), "b", descriptor)
        if b < 2:
            raise ValidationError(f"badic base must be >= 2 (alphabet size {max(b, 0)} < 2)")
        branches = [BranchSpec.affine(Fraction(1, b), Fraction(d, b)) for d in range(b)]
        return branches, list(range(b)), b

    if kind == "cantor":
        fields = _parse_fields(body)
        b = _int_field(fields, "b", descriptor)
        if b < 2:
            raise ValidationError("cantor base must be >= 2")
        try:
            digits = [int(d) for d in fields.get("digits", "").split("|") if d.strip()]
        except ValueError:
            raise ValidationError(f"cannot parse digits in {descriptor!r}") from None
        if len(set(digits)) != len(digits) or any(not 0 <= d < b for d in digits):
            raise ValidationError(f"cantor digits must be distinct values in [0, {b - 1}]")
        branches = [BranchSpec.affine(Fraction(1, b), Fraction(d, b)) for d in digits]
        return branches, list(range(len(digits))), b

    if kind == "cf":
        amax = _int_field(_parse_fields(body), "amax", descriptor)
        if amax < 1:
            raise ValidationError("cf amax must be >= 1")
        return [BranchSpec.moebius(i) for i in range(1, amax + 1)], list(range(1, amax + 1)), amax

    if kind == "affine":
        pairs = _AFFINE_PAIR.findall(body)
        if not pairs:
            raise ValidationError(f"no (slope, offset) pairs in {descriptor!r}")
        try:
            branches = [BranchSpec.affine(Fraction(a), Fraction(c)) for a, c in pairs]
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"cannot parse affine coefficients in {descriptor!r}") from None
        return branches, list(range(len(branches))), len(branches)

    raise ValidationError(f"unknown system kind {kind!r}")


def build_system(descriptor: str) -> IfsSystem:
    branches, labels, base = parse_descriptor(descriptor)
    return system_from_branches(branches, labels, descriptor=descriptor.strip(), base=base)


def system_from_branches(branches: Sequence[BranchSpec], labels: Optional[Sequence[int]] = None,
                         descriptor: str = "custom", base: Optional[int] = None) -> IfsSystem:
    branches = tuple(branches)
    labels = tuple(labels) if labels is not None else tuple(range(len(branches)))
    if len(branches) < 2:
        raise ValidationError(f"alphabet size must be at least 2, got {len(branches)}")
    if len(labels) != len(branches) or len(set(labels)) != len(labels):
        raise ValidationError("labels must be distinct, one per branch")

    _check_images(branches)
    if all(b.kind is not BranchKind.CALLBACK for b in branches):
        rho, eta, depth = _projective_contraction(branches)
        if all(b.kind is BranchKind.AFFINE for b in branches):
            K, certified = 1.0, True
        else:
            K, certified = _sampled_distortion(branches), False
    else:
        rho, eta, K = _callback_constants(branches)
        depth, certified = 1, False

    system = IfsSystem(
        descriptor=descriptor, branches=branches, labels=labels,
        base=base if base is not None else len(branches),
        rho=float(rho), eta=float(eta), K=float(K), K_certified=certified,
        contraction_depth=depth,
        _index={label: i for i, label in enumerate(labels)},
    )
    if not certified:
        logger.warning(f"{descriptor}: distortion constant K={system.K:.6g} is a sampled estimate, not certified")
    logger.info(f"Built {descriptor}: rho={system.rho:.6g}, eta={system.eta:.6g}, K={system.K:.6g}")
    return system


def branch_image(branch: BranchSpec) -> Tuple[Number, Number]:
    if branch.matrix() is not None:
        y0, y1 = branch(F0), branch(F1)
    else:
        y0, y1 = branch(0.0), branch(1.0)
    return (y0, y1) if y0 <= y1 else (y1, y0)


def branch_derivative_range(branch: BranchSpec) -> Tuple[float, float]:
    """(inf, sup) of |phi'| on [0,1]; endpoint values for projective branches, sampled otherwise."""
    if branch.matrix() is not None:
        ends = (float(branch.deriv(F0)), float(branch.deriv(F1)))
    else:
        ends = tuple(float(branch.deriv(x)) for x in np.linspace(0.0, 1.0, CALLBACK_GRID))
    return min(ends), max(ends)


def _check_images(branches: Sequence[BranchSpec]) -> None:
    images = []
    for i, branch in enumerate(branches):
        m = branch.matrix()
        if m is not None:
            a, b, c, d = m
            if d == 0 or (c + d) == 0 or (d > 0) != (c + d > 0):
                raise ValidationError(f"branch {i} has a pole in [0,1]")
        lo, hi = branch_image(branch)
        slack = 0 if m is not None else FIXED_POINT_SLACK
        if lo < -slack or hi > 1 + slack:
            raise ValidationError(f"branch {i} does not map [0,1] into [0,1]: image [{float(lo)}, {float(hi)}]")
        images.append((lo, hi, i))
    images.sort()
    for (lo1, hi1, i), (lo2, hi2, j) in zip(images, images[1:]):
        if hi1 > lo2:
            raise ValidationError(f"branches {i} and {j} have overlapping images")


def _projective_contraction(branches: Sequence[BranchSpec]) -> Tuple[Number, Number, int]:
    def sup_inf(m: Matrix) -> Tuple[Fraction, Fraction]:
        det = abs(determinant(m))
        d0, d1 = abs(m[3]), abs(m[2] + m[3])
        return det / min(d0, d1) ** 2, det / max(d0, d1) ** 2

    mats = [b.matrix() for b in branches]
    sups, infs = zip(*(sup_inf(m) for m in mats))
    eta = min(infs)
    sup1 = max(sups)
    if eta == 0:
        raise ValidationError("branch derivative vanishes")
    if sup1 < 1:
        return sup1, eta, 1
    if sup1 > 1:
        raise ValidationError(f"branch is not contracting (sup |phi'| = {float(sup1):.6g})")
    sup2 = max(sup_inf(compose(m1, m2))[0] for m1 in mats for m2 in mats)
    if sup2 >= 1:
        raise ValidationError("depth-2 compositions are not contracting")
    diam1 = max(hi - lo for lo, hi in map(branch_image, branches))
    rho = max(math.sqrt(sup2), float(diam1))
    logger.info(f"Single branches touch |phi'| = 1; contraction validated at depth 2 (rho={rho:.6g})")
    return rho, eta, 2


def _sampled_distortion(branches: Sequence[BranchSpec]) -> float:
    """Twice the largest max/min derivative ratio over sampled words of depth <= K_SAMPLE_DEPTH."""
    mats = [tuple(float(v) for v in b.matrix()) for b in branches]
    level = [(1.0, 0.0, 0.0, 1.0)]
    worst, sampled = 1.0, 0
    for _ in range(K_SAMPLE_DEPTH):
        if sampled + len(level) * len(mats) > K_SAMPLE_CAP:
            break
        nxt = []
        for m1 in level:
            for m2 in mats:
                a, b, c, d = compose(m1, m2)
                scale = max(abs(c), abs(d))
                m = (a / scale, b / scale, c / scale, d / scale)
                d0, d1 = abs(m[3]), abs(m[2] + m[3])
                worst = max(worst, (max(d0, d1) / min(d0, d1)) ** 2)
                nxt.append(m)
        sampled += len(nxt)
        level = nxt
    logger.debug(f"Distortion sampled over {sampled} words: worst ratio {worst:.6g}")
    return K_SAFETY_FACTOR * worst


def _callback_constants(branches: Sequence[BranchSpec]) -> Tuple[float, float, float]:
    grid = np.linspace(0.0, 1.0, CALLBACK_GRID)
    sups, infs, ratios = [], [], []
    for b in branches:
        values = np.array([b.deriv(x) for x in grid])
        sups.append(values.max())
        infs.append(values.min())
        ratios.append(values.max() / values.min() if values.min() > 0 else math.inf)
    rho, eta = max(sups), min(infs)
    if rho >= 1:
        raise ValidationError(f"callback branch is not contracting (sampled sup |phi'| = {rho:.6g})")
    if eta <= 0:
        raise ValidationError("callback branch derivative vanishes")
    return rho, eta, K_SAFETY_FACTOR * max(ratios)


# --- Cylinders ---

def _record_from_matrix(word: Word, m: Matrix) -> CylinderRecord:
    x0 = apply_matrix(m, F0)
    x1 = apply_matrix(m, F1)
    lo, hi = (x0, x1) if x0 <= x1 else (x1, x0)
    fixed = _matrix_fixed_point(m, lo, hi)
    exact = isinstance(fixed, Fraction)
    derivative = matrix_derivative(m, fixed) if exact else float(abs(determinant(m))) / (float(m[2]) * fixed + float(m[3])) ** 2
    return CylinderRecord(word=word, lo=lo, hi=hi, derivative=derivative,
                          fixed_point=fixed, matrix=m, exact=exact)


def _record_from_callbacks(system: IfsSystem, word: Word) -> CylinderRecord:
    x0, x1 = system.phi(word, 0.0), system.phi(word, 1.0)
    lo, hi = min(x0, x1), max(x0, x1)
    if hi - lo < 1e-15:
        fixed = 0.5 * (lo + hi)
    else:
        fixed = optimize.brentq(lambda x: system.phi(word, x) - x, 0.0, 1.0, xtol=1e-15)
    return CylinderRecord(word=word, lo=lo, hi=hi, derivative=system.phi_derivative(word, fixed),
                          fixed_point=fixed)


def cylinder_record(system: IfsSystem, word: Sequence[int]) -> CylinderRecord:
    word = system.check_word(word)
    if not word:
        raise ValidationError("cylinder_record needs a nonempty word")
    if system.is_projective:
        return _record_from_matrix(word, system.word_matrix(word))
    return _record_from_callbacks(system, word)


def child_records(system: IfsSystem, parent: CylinderRecord) -> Iterator[CylinderRecord]:
    """Records of parent.word + (a,) for every symbol a, by one extra composition each."""
    for label in system.labels:
        word = parent.word + (label,)
        if parent.matrix is not None:
            yield _record_from_matrix(word, compose(parent.matrix, system.branch(label).matrix()))
        else:
            yield _record_from_callbacks(system, word)


def check_budget(system: IfsSystem, n: int, budget: int = DEFAULT_BUDGET) -> int:
    if n < 1:
        raise ValidationError(f"depth must be >= 1, got {n}")
    count = system.alphabet_size ** n
    if count > budget:
        raise BudgetExceeded(f"{count} cylinders at depth {n} exceed the budget of {budget}")
    return count


def enumerate_cylinders(system: IfsSystem, n: int, budget: int = DEFAULT_BUDGET) -> Iterator[CylinderRecord]:
    """Every depth-n cylinder once, words in lexicographic order."""
    check_budget(system, n, budget)
    return _walk(system, None, n)


def _walk(system: IfsSystem, parent: Optional[CylinderRecord], remaining: int) -> Iterator[CylinderRecord]:
    children = ([cylinder_record(system, (a,)) for a in system.labels] if parent is None
                else child_records(system, parent))
    for child in children:
        if remaining == 1:
            yield child
        else:
            yield from _walk(system, child, remaining - 1)


def orbit(system: IfsSystem, word: Sequence[int], x: Number) -> List[Number]:
    """[x, T x, ..., T^n x] for x in I_n(word)."""
    points = [x]
    for a in word:
        x = system.branch(a).inverse(x)
        points.append(x)
    return points


# --- Vectorized levels ---

@dataclass
class CylinderLevel:
    depth: int
    words: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    fixed_point: np.ndarray
    log_derivative: np.ndarray
    log_sup_derivative: np.ndarray
    log_inf_derivative: np.ndarray

    @property
    def count(self) -> int:
        return len(self.lo)


def _float_branch_arrays(system: IfsSystem):
    mats = np.array([[float(v) for v in b.matrix()] for b in system.branches])
    logdet = np.log(np.abs(mats[:, 0] * mats[:, 3] - mats[:, 1] * mats[:, 2]))
    return mats, logdet


def _projective_chunk(system: IfsSystem, first_index: int, depth: int) -> CylinderLevel:
    mats, logdet_branch = _float_branch_arrays(system)
    k = system.alphabet_size
    labels = np.array(system.labels, dtype=np.min_scalar_type(max(system.labels)))
    a, b, c, d = (mats[first_index, i:i + 1].copy() for i in range(4))
    logdet = logdet_branch[first_index:first_index + 1].copy()
    logscale = np.zeros(1)
    words = labels[first_index:first_index + 1].reshape(1, 1)
    for _ in range(depth - 1):
        # M_{w a} = M_w M_a, rows in lexicographic order
        na = (a[:, None] * mats[None, :, 0] + b[:, None] * mats[None, :, 2]).ravel()
        nb = (a[:, None] * mats[None, :, 1] + b[:, None] * mats[None, :, 3]).ravel()
        nc = (c[:, None] * mats[None, :, 0] + d[:, None] * mats[None, :, 2]).ravel()
        nd = (c[:, None] * mats[None, :, 1] + d[:, None] * mats[None, :, 3]).ravel()
        scale = np.maximum(np.abs(nc), np.abs(nd))
        a, b, c, d = na / scale, nb / scale, nc / scale, nd / scale
        logscale = np.repeat(logscale, k) + np.log(scale)
        logdet = (logdet[:, None] + logdet_branch[None, :]).ravel()
        words = np.hstack([np.repeat(words, k, axis=0), np.tile(labels, len(words))[:, None]])

    x0, x1 = b / d, (a + b) / (c + d)
    lo, hi = np.minimum(x0, x1), np.maximum(x0, x1)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_affine = b / (d - a)
        bq = d - a
        root = np.sqrt(np.maximum(bq * bq + 4.0 * b * c, 0.0))
        qv = -0.5 * (bq + np.copysign(root, bq))
        r1, r2 = qv / c, -b / qv
        inside = (r1 >= lo - FIXED_POINT_SLACK) & (r1 <= hi + FIXED_POINT_SLACK)
        fixed = np.where(c == 0, x_affine, np.where(inside, r1, r2))
    d0, d1 = np.abs(d), np.abs(c + d)
    log_deriv = logdet - 2.0 * (logscale + np.log(np.abs(c * fixed + d)))
    log_sup = logdet - 2.0 * (logscale + np.log(np.minimum(d0, d1)))
    log_inf = logdet - 2.0 * (logscale + np.log(np.maximum(d0, d1)))
    return CylinderLevel(depth, words, lo, hi, fixed, log_deriv, log_sup, log_inf)


def _callback_chunk(system: IfsSystem, first_label: int, depth: int) -> CylinderLevel:
    records = [cylinder_record(system, (first_label,) + tail)
               for tail in itertools.product(system.labels, repeat=depth - 1)]
    words = np.array([r.word for r in records], dtype=np.int64).reshape(len(records), depth)
    lo = np.array([float(r.lo) for r in records])
    hi = np.array([float(r.hi) for r in records])
    log_deriv = np.log([float(r.derivative) for r in records])
    ends = np.log([[system.phi_derivative(r.word, 0.0), system.phi_derivative(r.word, 1.0)] for r in records])
    return CylinderLevel(depth, words, lo, hi, np.array([float(r.fixed_point) for r in records]),
                         log_deriv, np.maximum(ends.max(axis=1), log_deriv),
                         np.minimum(ends.min(axis=1), log_deriv))


def level_chunks(system: IfsSystem, n: int, workers: int = 1,
                 budget: int = DEFAULT_BUDGET) -> List[CylinderLevel]:
    """Depth-n cylinders as numpy arrays, one chunk per first symbol, in symbol order."""
    count = check_budget(system, n, budget)
    resources.ensure_level_fits(count, n)
    if system.is_projective:
        jobs = [(_projective_chunk, i) for i in range(system.alphabet_size)]
    else:
        jobs = [(_callback_chunk, label) for label in system.labels]
    if workers <= 1 or len(jobs) == 1:
        return [fn(system, arg, n) for fn, arg in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job[0](system, job[1], n), jobs))


def concat_levels(chunks: Sequence[CylinderLevel]) -> CylinderLevel:
    return CylinderLevel(
        depth=chunks[0].depth,
        words=np.vstack([c.words for c in chunks]),
        lo=np.concatenate([c.lo for c in chunks]),
        hi=np.concatenate([c.hi for c in chunks]),
        fixed_point=np.concatenate([c.fixed_point for c in chunks]),
        log_derivative=np.concatenate([c.log_derivative for c in chunks]),
        log_sup_derivative=np.concatenate([c.log_sup_derivative for c in chunks]),
        log_inf_derivative=np.concatenate([c.log_inf_derivative for c in chunks]),
    )
