"""Order-by-order solution of the equations of motion as power series in ``lam``.

This solves the raw hierarchy (not ``M*``), so it shares none of the sweep or
splitting choices made in :mod:`phi4zero.mapping`. Every right-hand-side term
carries an explicit factor of ``lam``; fixed-point iteration on series
therefore settles one more order per pass. All coefficients are integers
because every combinatorial weight is, so the arithmetic here is exact.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .combinatorics import enumerate_pair_partitions, enumerate_triple_partitions
from .model import GreenSequence, check_coupling, extract_splitting

__all__ = [
    "PowerSeries",
    "series_solve",
    "series_eval",
    "series_sequence",
    "oracle_compare",
    "truncation_estimates",
    "series_splitting",
    "first_inexact_order",
    "series_to_csv",
    "OracleError",
]


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class PowerSeries:
    """Truncated series ``sum_p coefficients[p] * lam**p`` for ``p <= order``."""

    coefficients: tuple
    order: int

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be >= 0")
        coeffs = tuple(self.coefficients[: self.order + 1])
        coeffs += (0,) * (self.order + 1 - len(coeffs))
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def zero(cls, order: int) -> PowerSeries:
        return cls((), order)

    @classmethod
    def constant(cls, c, order: int) -> PowerSeries:
        return cls((c,), order)

    def __add__(self, other: PowerSeries) -> PowerSeries:
        return PowerSeries(tuple(a + b for a, b in zip(self.coefficients, other.coefficients)), self.order)

    def __sub__(self, other: PowerSeries) -> PowerSeries:
        return PowerSeries(tuple(a - b for a, b in zip(self.coefficients, other.coefficients)), self.order)

    def __neg__(self) -> PowerSeries:
        return PowerSeries(tuple(-a for a in self.coefficients), self.order)

    def __mul__(self, other):
        if isinstance(other, PowerSeries):
            a, b = self.coefficients, other.coefficients
            out = [0] * (self.order + 1)
            for i, ai in enumerate(a):
                if ai == 0:
                    continue
                for j in range(self.order + 1 - i):
                    out[i + j] += ai * b[j]
            return PowerSeries(tuple(out), self.order)
        return PowerSeries(tuple(a * other for a in self.coefficients), self.order)

    __rmul__ = __mul__

    def shift(self) -> PowerSeries:
        """Multiply by ``lam`` (dropping the overflowing top coefficient)."""
        return PowerSeries((0,) + self.coefficients[:-1], self.order)

    def leading(self) -> tuple[int, object] | None:
        """``(power, coefficient)`` of the lowest nonzero term."""
        for p, c in enumerate(self.coefficients):
            if c != 0:
                return p, c
        return None

    def __call__(self, lam: float) -> float:
        return series_eval(self, lam)


def series_eval(series: PowerSeries, lam: float) -> float:
    """Horner evaluation in double precision."""
    acc = 0.0
    for c in reversed(series.coefficients):
        acc = acc * lam + float(c)
    return acc


def _integer_weight(n: int, parts, sigma: int = 1) -> int:
    from math import factorial, prod

    w, r = divmod(factorial(n), prod(factorial(p) for p in parts) * sigma)
    assert r == 0
    return w


def series_solve(n_max: int, order: int) -> dict[int, PowerSeries]:
    """Series for every ``H^{n+1}``, ``n = 1..n_max`` odd, exact through ``lam**order``.

    The top level uses the zero closure; see :func:`first_inexact_order` for
    where that starts to matter.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if n_max < 5 or n_max % 2 == 0:
        raise ValueError(f"n_max must be odd and >= 5, got {n_max}")
    levels = range(1, n_max + 1, 2)
    pairs = {n: [(p.j1, p.j2, _integer_weight(n, (p.j1, p.j2))) for p in enumerate_pair_partitions(n)]
             for n in levels if n >= 3}
    triples = {n: [(t.parts, _integer_weight(n, t.parts, t.sigma_sym)) for t in enumerate_triple_partitions(n)]
               for n in levels if n >= 3}

    zero = PowerSeries.zero(order)
    h = {n: zero for n in levels}
    h[1] = PowerSeries.constant(1, order)

    for _ in range(order):
        new = {1: PowerSeries.constant(1, order) - h[3].shift()}
        for n in levels:
            if n < 3:
                continue
            a = -(h[n + 2] if n + 2 <= n_max else zero)
            b = zero
            for j1, j2, w in pairs[n]:
                b = b + (h[j2 + 1] * h[j1]) * w
            c = zero
            for (i1, i2, i3), w in triples[n]:
                c = c + (h[i1] * h[i2] * h[i3]) * w
            new[n] = (a + b * -3 + c * -6).shift()
        h = new
    return h


def first_inexact_order(n_max: int) -> int:
    """Lowest power of ``lam`` at which the zero closure can alter any series.

    The dropped ``-lam H^{n_max+3}`` starts at ``lam**((n_max+3)/2)`` and only
    travels down the hierarchy through further factors of ``lam``.
    """
    return (n_max + 3) // 2


def series_sequence(series: dict[int, PowerSeries], lam: float) -> GreenSequence:
    return GreenSequence([series_eval(series[n], lam) for n in sorted(series)])


def oracle_compare(result, order: int, lam: float | None = None) -> dict[int, float]:
    """Per-level ``|solver - series| / max(|series|, 1)`` for closure-exact levels.

    Parameters
    ----------
    result : RunResult
        Must be converged.
    order : int
        Truncation order of the series.
    lam : float, optional
        Defaults to the run's coupling; must match it.
    """
    from .solver import Status

    if result.status is not Status.CONVERGED:
        raise OracleError(f"solver result is {result.status.value}, not Converged")
    if lam is None:
        lam = result.config.lam
    lam = check_coupling(lam)
    if lam != result.config.lam:
        raise OracleError("coupling differs from the run's coupling")
    n_max = result.h_conv.n_max
    if order >= first_inexact_order(n_max):
        raise OracleError(f"order {order} reaches the truncation error of n_max={n_max}")
    series = series_solve(n_max, order)
    out = {}
    # the top level reads the closure, not a genuine component
    for n in range(1, n_max - 1, 2):
        s = series_eval(series[n], lam)
        out[n] = abs(result.h_conv[n] - s) / max(abs(s), 1.0)
    return out


def truncation_estimates(n_max: int, order: int, lam: float) -> dict[int, float]:
    """Size of the first omitted term, ``|c_{order+1}| lam**(order+1) / max(|series|, 1)``.

    A component whose series is still identically zero at ``order`` is not
    resolved at all and gets ``inf``.
    """
    lam = check_coupling(lam)
    longer = series_solve(n_max, order + 1)
    out = {}
    for n, s in longer.items():
        head = PowerSeries(s.coefficients, order)
        if head.leading() is None:
            out[n] = float("inf")
            continue
        tail = abs(float(s.coefficients[order + 1])) * lam ** (order + 1)
        out[n] = tail / max(abs(series_eval(head, lam)), 1.0)
    return out


def series_splitting(series: dict[int, PowerSeries], lam: float):
    """Splitting sequence of the evaluated series."""
    return extract_splitting(series_sequence(series, lam), lam)


def series_to_csv(series: dict[int, PowerSeries], fh=None) -> str:
    """Rows ``(component, power, coefficient)``; ``component`` is the ``n`` of ``H^{n+1}``."""
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "power", "coefficient"])
    for n in sorted(series):
        for p, c in enumerate(series[n].coefficients):
            w.writerow([n, p, c])
    return buf.getvalue() if fh is None else ""
