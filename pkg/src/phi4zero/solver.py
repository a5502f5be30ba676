"""Iteration driver: repeated sweeps of ``M*`` with per-component freezing.

After every sweep each still-active component is compared with its previous
value. Near zero (``|prev| <= eps``) the test is absolute, otherwise it is
relative. A component that passes is frozen at its current value and its
iteration index is stored as ``nu_conv``; the run stops once every component
is frozen, when the iteration budget is exhausted, or as soon as a sweep
degenerates or blows up.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mapping import SweepConfig, _sweep
from .model import (
    GreenSequence,
    SplittingSequence,
    calibrate_k0,
    check_coupling,
    closure_value,
    extract_splitting,
    fundamental_sequence,
)

__all__ = [
    "Status",
    "SolverConfig",
    "IterationTrace",
    "RunResult",
    "component_converged",
    "run",
    "warm_start_run",
    "two_step_run",
    "reconcile",
]

log = logging.getLogger(__name__)

# runs stop as Diverged once a component exceeds this multiple of the factorial bound
DIVERGENCE_FACTOR = 1e3


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    DIVERGED = "Diverged"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    n_max: int = 55
    epsilon_h: float = 1e-10
    max_iterations: int = 200
    sweep: SweepConfig = field(default_factory=SweepConfig)
    freeze: bool = True
    start: GreenSequence | None = None  # None means the fundamental sequence
    trace_stride: int = 1

    def __post_init__(self):
        check_coupling(self.lam)
        if isinstance(self.n_max, bool) or not isinstance(self.n_max, (int, np.integer)):
            raise TypeError("n_max must be an integer")
        if self.n_max < 5 or self.n_max % 2 == 0:
            raise ValueError(f"n_max must be odd and >= 5, got {self.n_max}")
        if not (self.epsilon_h > 0 and math.isfinite(self.epsilon_h)):
            raise ValueError("epsilon_h must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")
        if self.start is not None and self.start.n_max != self.n_max:
            raise ValueError(
                f"start sequence has n_max={self.start.n_max}, config has {self.n_max}"
            )


@dataclass(eq=False)
class IterationTrace:
    """Snapshots after each retained sweep ``nu`` (``nu`` starts at 1).

    ``h[k]`` and ``delta[k]`` belong to iteration ``nu[k]``; the start
    sequence is kept separately.
    """

    lam: float
    n_max: int
    start: GreenSequence
    nu: list[int] = field(default_factory=list)
    h: list[np.ndarray] = field(default_factory=list)
    delta: list[np.ndarray] = field(default_factory=list)
    nu_conv: np.ndarray | None = None
    status: Status | None = None

    @property
    def levels(self) -> range:
        return range(1, self.n_max + 1, 2)

    def h_matrix(self) -> np.ndarray:
        """Shape ``(snapshots, components)``."""
        return np.array(self.h).reshape(len(self.h), len(self.start))

    def delta_matrix(self) -> np.ndarray:
        return np.array(self.delta).reshape(len(self.delta), len(self.start))

    def delta_series(self, n: int) -> np.ndarray:
        return self.delta_matrix()[:, (n - 1) // 2]

    def h_series(self, n: int) -> np.ndarray:
        return self.h_matrix()[:, (n - 1) // 2]

    def frozen_mask(self) -> np.ndarray:
        """Boolean ``(snapshots, components)``: frozen at or before that snapshot."""
        nu = np.asarray(self.nu)[:, None]
        conv = np.asarray(self.nu_conv)[None, :]
        return (conv > 0) & (conv <= nu)


@dataclass(frozen=True, eq=False)
class RunResult:
    config: SolverConfig
    h_conv: GreenSequence
    delta_conv: SplittingSequence
    nu_conv: np.ndarray  # 0 where unset
    status: Status
    iterations_used: int

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def nu_conv_dict(self) -> dict[int, int | None]:
        return {n: (int(k) or None) for n, k in zip(self.h_conv.levels, self.nu_conv)}


def component_converged(prev: float, nxt: float, epsilon_h: float) -> bool:
    if not epsilon_h > 0:
        raise ValueError("epsilon_h must be positive")
    if not (math.isfinite(prev) and math.isfinite(nxt)):
        return False
    if abs(prev) <= epsilon_h:
        return abs(nxt - prev) < epsilon_h
    return abs(nxt / prev - 1.0) < epsilon_h


def _converged_mask(prev: np.ndarray, nxt: np.ndarray, eps: float) -> np.ndarray:
    small = np.abs(prev) <= eps
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(nxt / np.where(small, 1.0, prev) - 1.0)
    ok = np.where(small, np.abs(nxt - prev) < eps, rel < eps)
    return ok & np.isfinite(nxt)


def _iterate(config: SolverConfig, steps_per_iteration: int) -> tuple[RunResult, IterationTrace]:
    lam = float(config.lam)
    if config.start is None:
        start, _ = fundamental_sequence(lam, config.n_max)
    else:
        start = config.start
    top = closure_value(lam, config.n_max, config.sweep.closure)
    eps = config.epsilon_h

    log_cap = (
        np.array([math.lgamma(n + 1) for n in start.levels])
        + np.array(list(start.levels)) * math.log(max(calibrate_k0(start), 1.0))
        + math.log(DIVERGENCE_FACTOR)
    )

    trace = IterationTrace(lam, config.n_max, start)
    h = start.values.copy()
    nu_conv = np.zeros(h.size, dtype=int)
    status = Status.MAX_ITERATIONS
    nu = 0
    last_kept = 0

    for nu in range(1, config.max_iterations + 1):
        nxt = h
        bad = None
        for _ in range(steps_per_iteration):
            out = _sweep(nxt, lam, config.sweep, top)
            if not out.ok:
                bad = Status.DEGENERATE if out.degenerate else Status.DIVERGED
                break
            nxt = out.values
        if bad is not None:
            status = bad
            nu -= 1
            break
        if config.freeze:
            nxt = np.where(nu_conv > 0, h, nxt)
        with np.errstate(divide="ignore"):
            if np.any(np.log(np.abs(nxt)) > log_cap):
                status = Status.DIVERGED
                nu -= 1
                break

        ok = _converged_mask(h, nxt, eps)
        if config.freeze:
            nu_conv[(nu_conv == 0) & ok] = nu
        else:
            nu_conv[~ok] = 0
            nu_conv[(nu_conv == 0) & ok] = nu
        h = nxt

        done = bool(np.all(nu_conv > 0))
        if done or nu % config.trace_stride == 0:
            _record(trace, nu, h, lam)
            last_kept = nu
        if done:
            status = Status.CONVERGED
            break

    if nu > 0 and last_kept != nu:
        _record(trace, nu, h, lam)
    if status is not Status.CONVERGED and status is not Status.MAX_ITERATIONS:
        log.info("run at lam=%g n_max=%d stopped: %s after %d iterations",
                 lam, config.n_max, status.value, nu)

    h_conv = GreenSequence(h)
    trace.nu_conv = nu_conv.copy()
    trace.status = status
    result = RunResult(
        config=config,
        h_conv=h_conv,
        delta_conv=extract_splitting(h_conv, lam),
        nu_conv=nu_conv,
        status=status,
        iterations_used=nu,
    )
    return result, trace


def _record(trace: IterationTrace, nu: int, h: np.ndarray, lam: float) -> None:
    hs = GreenSequence(h)
    trace.nu.append(nu)
    trace.h.append(hs.values)
    trace.delta.append(extract_splitting(hs, lam).values)


def run(config: SolverConfig) -> tuple[RunResult, IterationTrace]:
    """Iterate ``M*`` from the configured start until convergence, budget or breakdown."""
    return _iterate(config, 1)


def two_step_run(config: SolverConfig) -> tuple[RunResult, IterationTrace]:
    """Like :func:`run`, but one iteration is two composed sweeps."""
    return _iterate(config, 2)


def reconcile(h: GreenSequence, lam: float, n_max: int) -> GreenSequence:
    """Truncate ``h`` to ``n_max``, or extend it with fundamental-sequence values."""
    if h.n_max == n_max:
        return h
    if h.n_max > n_max:
        return GreenSequence(h.values[: (n_max + 1) // 2])
    h0, _ = fundamental_sequence(lam, n_max)
    vals = h0.values.copy()
    vals[: h.values.size] = h.values
    return GreenSequence(vals)


def warm_start_run(config: SolverConfig, previous: RunResult) -> tuple[RunResult, IterationTrace]:
    """Seed the iteration with a previous result's sequence."""
    seed = reconcile(previous.h_conv, config.lam, config.n_max)
    return run(replace(config, start=seed))
