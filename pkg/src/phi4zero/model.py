"""Truncated Green's-function sequences and the zero-dimensional equations of motion.

Conventions
-----------
A truncated sequence stores ``H^{n+1}`` for every odd ``n`` in ``[1, n_max]``;
component ``H^{n+1}`` sits at array index ``(n - 1) // 2``. Functions that take
a level ``n`` always mean this odd ``n`` (so ``h[3]`` is ``H^4``).

The system solved is::

    H^2     = 1 - lam * H^4
    H^{n+1} = A^{n+1} + B^{n+1} + C^{n+1}          (n >= 3)

    A^{n+1} = -lam * H^{n+3}
    B^{n+1} = -3 lam * sum_pairs   n!/(j1! j2!)          H^{j2+2} H^{j1+1}
    C^{n+1} = -6 lam * sum_triples n!/(i1! i2! i3! sym)  H^{i1+1} H^{i2+1} H^{i3+1}
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .combinatorics import level_table

__all__ = [
    "ClosureMode",
    "GreenSequence",
    "SplittingSequence",
    "TermBreakdown",
    "Residual",
    "SignReport",
    "BoundReport",
    "check_coupling",
    "term_A",
    "term_B",
    "term_C",
    "terms",
    "eom_residual",
    "fundamental_sequence",
    "sequence_from_splitting",
    "closure_value",
    "check_signs",
    "expected_sign",
    "extract_splitting",
    "bound_check",
    "calibrate_k0",
]


class ClosureMode(str, enum.Enum):
    """Value used for ``H^{n_max+3}`` in the top-level ``A`` term."""

    ZERO = "zero"
    FUNDAMENTAL = "fundamental"


def check_coupling(lam: float) -> float:
    lam = float(lam)
    if not (math.isfinite(lam) and lam > 0):
        raise ValueError(f"coupling must be positive and finite, got {lam}")
    return lam


def _check_n_max(n_max: int) -> int:
    if isinstance(n_max, bool) or not isinstance(n_max, (int, np.integer)):
        raise TypeError(f"n_max must be an integer, got {n_max!r}")
    if n_max < 5 or n_max % 2 == 0:
        raise ValueError(f"n_max must be odd and >= 5, got {n_max}")
    return int(n_max)


def _idx(n: int) -> int:
    return (n - 1) // 2


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GreenSequence:
    """Immutable truncated sequence ``{H^{n+1}}``, ``n = 1, 3, ..., n_max``."""

    values: np.ndarray

    def __post_init__(self):
        arr = _readonly(self.values)
        if arr.ndim != 1:
            raise ValueError("values must be one-dimensional")
        _check_n_max(2 * arr.size - 1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("GreenSequence components must be finite")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_dict(cls, components: dict[int, float]) -> GreenSequence:
        """Build from ``{n: H^{n+1}}``; the keys must be exactly 1, 3, ..., n_max."""
        n_max = max(components)
        expected = set(range(1, n_max + 1, 2))
        if set(components) != expected:
            raise ValueError(f"levels must be exactly the odd integers 1..{n_max}")
        return cls([components[n] for n in sorted(components)])

    @property
    def n_max(self) -> int:
        return 2 * self.values.size - 1

    @property
    def levels(self) -> range:
        return range(1, self.n_max + 1, 2)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, n: int) -> float:
        if n % 2 == 0 or not 1 <= n <= self.n_max:
            raise KeyError(n)
        return float(self.values[_idx(n)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, GreenSequence):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def as_dict(self) -> dict[int, float]:
        return {n: float(v) for n, v in zip(self.levels, self.values)}

    def replace(self, updates: dict[int, float]) -> GreenSequence:
        vals = self.values.copy()
        for n, v in updates.items():
            if n % 2 == 0 or not 1 <= n <= self.n_max:
                raise KeyError(n)
            vals[_idx(n)] = v
        return GreenSequence(vals)


@dataclass(frozen=True, eq=False)
class SplittingSequence:
    """The ``delta_n`` values belonging to a sequence; ``nan`` marks an undefined entry."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))

    @property
    def n_max(self) -> int:
        return 2 * self.values.size - 1

    @property
    def levels(self) -> range:
        return range(1, self.n_max + 1, 2)

    @property
    def undefined(self) -> list[int]:
        return [n for n, v in zip(self.levels, self.values) if not np.isfinite(v)]

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, n: int) -> float:
        if n % 2 == 0 or not 1 <= n <= self.n_max:
            raise KeyError(n)
        return float(self.values[_idx(n)])

    def as_dict(self) -> dict[int, float]:
        return {n: float(v) for n, v in zip(self.levels, self.values)}


@dataclass(frozen=True)
class TermBreakdown:
    a: float
    b: float
    c: float


# -- array kernels (no validation; shared with the mapping) -----------------


def _b(values: np.ndarray, n: int, lam: float) -> float:
    t = level_table(n)
    return -3.0 * lam * float(np.dot(t.pair_w, values[t.pair_hi] * values[t.pair_lo]))


def _c(values: np.ndarray, n: int, lam: float) -> float:
    t = level_table(n)
    prod = values[t.tri_a] * values[t.tri_b] * values[t.tri_c]
    return -6.0 * lam * float(np.dot(t.tri_w, prod))


def _build(deltas: np.ndarray, lam: float) -> np.ndarray:
    vals = np.zeros(deltas.size)
    vals[0] = 1.0 + lam * deltas[0]
    vals[1] = -deltas[1] * vals[0] ** 3
    for n in range(5, 2 * deltas.size, 2):
        vals[_idx(n)] = deltas[_idx(n)] * _c(vals, n, lam) / (3.0 * lam * n * (n - 1))
    return vals


def _fundamental_deltas(lam: float, n_max: int) -> np.ndarray:
    deltas = np.empty((n_max + 1) // 2)
    deltas[0] = 6.0 * lam
    deltas[1] = 6.0 * lam
    for n in range(5, n_max + 1, 2):
        nn1 = n * (n - 1)
        deltas[_idx(n)] = 3.0 * lam * nn1 / (1.0 + 0.5 * lam * nn1)
    return deltas


@lru_cache(maxsize=256)
def _fundamental_values(lam: float, n_max: int) -> np.ndarray:
    vals = _build(_fundamental_deltas(lam, n_max), lam)
    vals.setflags(write=False)
    return vals


def closure_value(lam: float, n_max: int, closure: ClosureMode) -> float:
    """The stand-in for ``H^{n_max+3}``, the first component past the truncation."""
    closure = ClosureMode(closure)
    if closure is ClosureMode.ZERO:
        return 0.0
    return float(_fundamental_values(float(lam), n_max + 2)[-1])


def _a(values: np.ndarray, n: int, lam: float, top: float) -> float:
    j = _idx(n) + 1
    return -lam * (values[j] if j < values.size else top)


# -- public operations --------------------------------------------------------


def _check_level(h: GreenSequence, n: int) -> None:
    if n % 2 == 0 or not 3 <= n <= h.n_max:
        raise ValueError(f"level must be odd in [3, {h.n_max}], got {n}")


def _finite_or_raise(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise OverflowError(f"{what} is not finite")
    return x


def term_A(h: GreenSequence, n: int, lam: float, closure: ClosureMode = ClosureMode.ZERO) -> float:
    """``-lam * H^{n+3}``; the component past ``n_max`` comes from the closure."""
    lam = check_coupling(lam)
    _check_level(h, n)
    return _a(h.values, n, lam, closure_value(lam, h.n_max, closure))


def term_B(h: GreenSequence, n: int, lam: float) -> float:
    lam = check_coupling(lam)
    _check_level(h, n)
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite_or_raise(_b(h.values, n, lam), f"B at level {n}")


def term_C(h: GreenSequence, n: int, lam: float) -> float:
    lam = check_coupling(lam)
    _check_level(h, n)
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite_or_raise(_c(h.values, n, lam), f"C at level {n}")


def terms(h: GreenSequence, n: int, lam: float, closure: ClosureMode = ClosureMode.ZERO) -> TermBreakdown:
    return TermBreakdown(term_A(h, n, lam, closure), term_B(h, n, lam), term_C(h, n, lam))


@dataclass(frozen=True)
class Residual:
    """Equation-of-motion residuals per level; ``relative = raw / max(|H^{n+1}|, 1)``."""

    raw: np.ndarray
    relative: np.ndarray

    @property
    def levels(self) -> range:
        return range(1, 2 * self.raw.size, 2)

    def max_relative(self, levels=None) -> float:
        if levels is None:
            return float(np.max(np.abs(self.relative)))
        return float(max(abs(self.relative[_idx(n)]) for n in levels))


def eom_residual(h: GreenSequence, lam: float, closure: ClosureMode = ClosureMode.ZERO) -> Residual:
    lam = check_coupling(lam)
    v = h.values
    top = closure_value(lam, h.n_max, closure)
    raw = np.empty_like(v)
    raw[0] = v[0] - (1.0 - lam * v[1])
    for n in range(3, h.n_max + 1, 2):
        raw[_idx(n)] = v[_idx(n)] - (_a(v, n, lam, top) + _b(v, n, lam) + _c(v, n, lam))
    return Residual(raw, raw / np.maximum(np.abs(v), 1.0))


def sequence_from_splitting(deltas: SplittingSequence, lam: float) -> GreenSequence:
    """Build ``H`` upward from a splitting sequence.

    ``H^2 = 1 + lam delta_1``, ``H^4 = -delta_3 (H^2)^3`` and, for ``n >= 5``,
    ``H^{n+1} = delta_n C^{n+1} / (3 lam n (n - 1))`` with ``C`` taken from the
    components already built. This is the inverse of :func:`extract_splitting`.
    """
    lam = check_coupling(lam)
    if deltas.undefined:
        raise ValueError(f"splitting undefined at levels {deltas.undefined}")
    with np.errstate(over="ignore", invalid="ignore"):
        vals = _build(deltas.values, lam)
    return GreenSequence(vals)


def fundamental_sequence(lam: float, n_max: int) -> tuple[GreenSequence, SplittingSequence]:
    """The explicit starting point ``H_0`` and its splitting sequence.

    ``delta_1 = delta_3 = 6 lam`` and ``delta_n = 3 lam n (n-1) / (1 + lam n (n-1) / 2)``.
    """
    lam = check_coupling(lam)
    n_max = _check_n_max(n_max)
    h = GreenSequence(_fundamental_values(lam, n_max))
    return h, SplittingSequence(_fundamental_deltas(lam, n_max))


def expected_sign(n: int) -> int:
    """+1 for ``H^2, H^6, H^10, ...``; -1 for ``H^4, H^8, ...``."""
    return 1 if n % 4 == 1 else -1


@dataclass(frozen=True)
class SignReport:
    passed: bool
    first_violation: int | None
    zero_levels: tuple[int, ...] = ()
    all_zero: bool = False


def check_signs(h: GreenSequence) -> SignReport:
    """Alternating-sign test; zero components are skipped and listed."""
    first = None
    zeros = []
    for n, v in zip(h.levels, h.values):
        if v == 0.0:
            zeros.append(n)
        elif first is None and np.sign(v) != expected_sign(n):
            first = n
    return SignReport(first is None, first, tuple(zeros), len(zeros) == len(h))


def extract_splitting(h: GreenSequence, lam: float) -> SplittingSequence:
    """Invert the splitting relations for ``delta``; undefined entries become ``nan``."""
    lam = check_coupling(lam)
    v = h.values
    d = np.full(v.size, np.nan)
    d[0] = (v[0] - 1.0) / lam
    if v[0] != 0.0:
        d[1] = -v[1] / v[0] ** 3
    for n in range(5, h.n_max + 1, 2):
        c = _c(v, n, lam)
        if c != 0.0 and math.isfinite(c):
            d[_idx(n)] = 3.0 * lam * n * (n - 1) * v[_idx(n)] / c
    return SplittingSequence(d)


def _log_bound(n: int, k0: float) -> float:
    return math.lgamma(n + 1) + n * math.log(k0)


@dataclass(frozen=True)
class BoundReport:
    passed: bool
    first_violation: int | None
    k0: float


def bound_check(h: GreenSequence, k0: float) -> BoundReport:
    """Test ``|H^{n+1}| <= n! k0^n`` for every component (log space)."""
    if not k0 > 0:
        raise ValueError("k0 must be positive")
    for n, v in zip(h.levels, h.values):
        if v != 0.0 and math.log(abs(v)) > _log_bound(n, k0) + 1e-12:
            return BoundReport(False, n, k0)
    return BoundReport(True, None, k0)


def calibrate_k0(h: GreenSequence) -> float:
    """Smallest ``k0`` for which ``h`` satisfies the factorial bound."""
    best = 0.0
    for n, v in zip(h.levels, h.values):
        if v != 0.0:
            best = max(best, math.exp((math.log(abs(v)) - math.lgamma(n + 1)) / n))
    return best if best > 0 else 1.0
