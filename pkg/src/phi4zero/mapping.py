"""One application of the splitting-preserving map ``M*``.

For an input sequence ``h`` the image is::

    H^2'     = 1 + lam * delta_1'              delta_1' = -H^4
    H^4'     = -delta_3' * (H^2')^3            delta_3' = 6 lam / (1 + 9 lam H^2 - lam |H^6| / |H^4|)
    H^{n+1}' = delta_n' C^{n+1}' / (3 lam n (n-1))
             = C^{n+1}' / (1 + D_n)           delta_n' = 3 lam n (n-1) / (1 + D_n)
    D_n      = (|B^{n+1}| - |A^{n+1}|) / |H^{n+1}|

``delta_3'`` and ``D_n`` always read the input sequence. ``C'`` reads the
already-updated lower components in the upward sweep and the input in the
Jacobi sweep.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import (
    ClosureMode,
    GreenSequence,
    SplittingSequence,
    _a,
    _b,
    _c,
    _idx,
    check_coupling,
    closure_value,
)

__all__ = [
    "SweepOrder",
    "SweepConfig",
    "MStarOutput",
    "DegenerateError",
    "delta1_prime",
    "delta3_prime",
    "d_n",
    "apply_mstar",
]

# below this |H^{n+1}| the ratio D_n is treated as undefined
TINY = 1e-300


class SweepOrder(str, enum.Enum):
    UPWARD = "upward"
    JACOBI = "jacobi"


@dataclass(frozen=True)
class SweepConfig:
    order: SweepOrder = SweepOrder.UPWARD
    closure: ClosureMode = ClosureMode.ZERO

    def __post_init__(self):
        object.__setattr__(self, "order", SweepOrder(self.order))
        object.__setattr__(self, "closure", ClosureMode(self.closure))


class DegenerateError(ArithmeticError):
    """A guarded division in the map hit a vanishing denominator."""


@dataclass(frozen=True, eq=False)
class MStarOutput:
    """Image of one sweep.

    ``values`` and ``deltas`` are raw arrays that may hold ``nan``/``inf``
    when the sweep degenerated or overflowed; ``h_next`` is only available
    for a clean sweep.
    """

    values: np.ndarray
    deltas: np.ndarray
    d_values: dict[int, float]
    degenerate: tuple[int, ...] = ()
    nonfinite: bool = False

    @property
    def ok(self) -> bool:
        return not self.degenerate and not self.nonfinite

    @property
    def h_next(self) -> GreenSequence:
        if not self.ok:
            raise DegenerateError(
                f"sweep degenerate at levels {list(self.degenerate)}"
                if self.degenerate
                else "sweep produced non-finite components"
            )
        return GreenSequence(self.values)

    @property
    def delta_next(self) -> SplittingSequence:
        return SplittingSequence(self.deltas)


def delta1_prime(h: GreenSequence) -> float:
    return -h[3]


def _delta3(v: np.ndarray, lam: float) -> float:
    h2, h4, h6 = v[0], v[1], v[2]
    if h4 == 0.0 or h2 == 0.0:
        raise DegenerateError("delta_3' needs nonzero H^2 and H^4")
    denom = 1.0 + 6.0 * lam * h2 * (1.5 - abs(h6) / (6.0 * abs(h4) * abs(h2)))
    if denom == 0.0:
        raise DegenerateError("delta_3' denominator vanishes")
    return 6.0 * lam / denom


def delta3_prime(h: GreenSequence, lam: float) -> float:
    return _delta3(h.values, check_coupling(lam))


def _d_n(v: np.ndarray, n: int, lam: float, top: float) -> float:
    hn = abs(v[_idx(n)])
    if not hn >= TINY:
        raise DegenerateError(f"|H^{n + 1}| vanishes at level {n}")
    return (abs(_b(v, n, lam)) - abs(_a(v, n, lam, top))) / hn


def d_n(h: GreenSequence, n: int, lam: float, closure: ClosureMode = ClosureMode.ZERO) -> float:
    lam = check_coupling(lam)
    if n % 2 == 0 or not 5 <= n <= h.n_max:
        raise ValueError(f"D_n is defined for odd 5 <= n <= {h.n_max}, got {n}")
    return _d_n(h.values, n, lam, closure_value(lam, h.n_max, closure))


def _sweep(v: np.ndarray, lam: float, cfg: SweepConfig, top: float) -> MStarOutput:
    m = v.size
    out = np.full(m, np.nan)
    deltas = np.full(m, np.nan)
    d_values: dict[int, float] = {}
    degenerate: list[int] = []
    upward = cfg.order is SweepOrder.UPWARD
    src = out if upward else v

    with np.errstate(all="ignore"):
        deltas[0] = -v[1]
        out[0] = 1.0 + lam * deltas[0]
        try:
            deltas[1] = _delta3(v, lam)
            out[1] = -deltas[1] * out[0] ** 3
        except DegenerateError:
            degenerate.append(3)
        for n in range(5, 2 * m, 2):
            i = _idx(n)
            try:
                dn = _d_n(v, n, lam, top)
            except DegenerateError:
                degenerate.append(n)
                continue
            d_values[n] = dn
            if 1.0 + dn == 0.0:
                degenerate.append(n)
                continue
            nn1 = n * (n - 1)
            deltas[i] = 3.0 * lam * nn1 / (1.0 + dn)
            # C at level n only reads levels < n, which `out` already holds
            out[i] = deltas[i] * _c(src, n, lam) / (3.0 * lam * nn1)
    nonfinite = not degenerate and not bool(np.all(np.isfinite(out)))
    return MStarOutput(out, deltas, d_values, tuple(degenerate), nonfinite)


def apply_mstar(h: GreenSequence, lam: float, cfg: SweepConfig | None = None) -> MStarOutput:
    """Apply ``M*`` once. Degeneracy and overflow are reported in the output, not raised."""
    lam = check_coupling(lam)
    cfg = cfg or SweepConfig()
    return _sweep(h.values, lam, cfg, closure_value(lam, h.n_max, cfg.closure))
