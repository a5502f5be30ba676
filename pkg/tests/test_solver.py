from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from phi4zero.mapping import SweepConfig
from phi4zero.model import GreenSequence, check_signs, fundamental_sequence
from phi4zero.solver import (
    SolverConfig,
    Status,
    component_converged,
    reconcile,
    run,
    two_step_run,
    warm_start_run,
)


@pytest.mark.parametrize(
    "prev, nxt, expected",
    [(1.0, 1.0 + 5e-11, True), (0.0, 5e-11, True), (2.0, 2.001, False), (1e-11, 5e-11, True),
     (1.0, math.nan, False), (math.inf, 1.0, False), (-3.0, -3.0, True)],
)
def test_component_converged(prev, nxt, expected):
    assert component_converged(prev, nxt, 1e-10) is expected


def test_component_converged_needs_positive_epsilon():
    with pytest.raises(ValueError):
        component_converged(1.0, 1.0, 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_max=4), dict(n_max=54), dict(epsilon_h=0.0), dict(epsilon_h=-1e-10),
     dict(max_iterations=0), dict(lam=0.0), dict(trace_stride=0), dict(n_max=True)],
)
def test_config_validation(kwargs):
    base = dict(lam=0.01, n_max=55)
    base.update(kwargs)
    with pytest.raises((ValueError, TypeError)):
        SolverConfig(**base)


def test_config_rejects_mismatched_start():
    h0, _ = fundamental_sequence(0.01, 21)
    with pytest.raises(ValueError):
        SolverConfig(lam=0.01, n_max=55, start=h0)


def test_converges_at_small_coupling(run_001):
    result, trace = run_001
    assert result.status is Status.CONVERGED and result.converged
    assert result.iterations_used <= 200
    assert np.all(result.nu_conv > 0)
    assert check_signs(result.h_conv).passed
    assert 1.0 < result.h_conv[1] < 1.01
    assert trace.nu == list(range(1, result.iterations_used + 1))


def test_frozen_components_stay_constant(run_001):
    result, trace = run_001
    h = trace.h_matrix()
    for col, k in enumerate(result.nu_conv):
        frozen = h[k - 1:, col]
        assert np.all(frozen == frozen[0])
    mask = trace.frozen_mask()
    assert mask[-1].all() and not mask[0].all()


def test_convergence_held_at_freeze_time(run_001):
    result, trace = run_001
    h = np.vstack([trace.start.values, trace.h_matrix()])
    for col, k in enumerate(result.nu_conv):
        assert component_converged(h[k - 1, col], h[k, col], result.config.epsilon_h)


def test_monotone_delta_after_burn_in(run_001):
    _, trace = run_001
    full = trace.delta_matrix()
    delta = full[3:]
    for col in range(delta.shape[1]):
        d = np.diff(delta[:, col])
        span = np.ptp(full[:, col])
        main = np.sign(delta[-1, col] - delta[0, col])
        against = d[np.sign(d) == -main]
        if 2 * col + 1 <= 27:
            # strictly monotone up to round-off once neighbouring levels freeze
            assert np.all(np.abs(against) <= 1e-9 * np.max(np.abs(delta[:, col])))
        else:
            # higher levels overshoot once, by a small fraction of their whole excursion
            assert np.sum(np.abs(against)) < 0.05 * span


def test_runs_are_deterministic():
    cfg = SolverConfig(lam=0.03, n_max=31)
    a, ta = run(cfg)
    b, tb = run(cfg)
    assert np.array_equal(ta.h_matrix(), tb.h_matrix())
    assert np.array_equal(a.nu_conv, b.nu_conv)


def test_large_coupling_does_not_converge():
    result, _ = run(SolverConfig(lam=0.10, n_max=55))
    assert result.status is not Status.CONVERGED
    assert result.iterations_used <= 200


def test_last_values_kept_when_not_converged():
    result, trace = run(SolverConfig(lam=0.10, n_max=55, max_iterations=20))
    assert result.status is Status.MAX_ITERATIONS
    assert np.array_equal(result.h_conv.values, trace.h[-1])


def test_divergence_is_detected():
    start = GreenSequence(fundamental_sequence(0.5, 41)[0].values * np.linspace(1, 50, 21))
    result, _ = run(SolverConfig(lam=0.5, n_max=41, start=start, max_iterations=200))
    assert result.status in (Status.DIVERGED, Status.DEGENERATE)


def test_trace_stride_keeps_final_snapshot():
    result, trace = run(SolverConfig(lam=0.01, n_max=55, trace_stride=10))
    assert trace.nu[-1] == result.iterations_used
    assert all(nu % 10 == 0 for nu in trace.nu[:-1])


def test_freeze_off_requires_simultaneous_convergence():
    result, _ = run(SolverConfig(lam=0.01, n_max=31, freeze=False))
    assert result.converged
    assert np.all(result.nu_conv <= result.iterations_used)


def test_jacobi_and_fundamental_closure_converge():
    for sweep in (SweepConfig("jacobi"), SweepConfig("upward", "fundamental")):
        result, _ = run(SolverConfig(lam=0.01, n_max=31, sweep=sweep))
        assert result.converged


def test_two_step_matches_single_step(run_001):
    single, _ = run_001
    double, _ = two_step_run(single.config)
    assert double.converged
    np.testing.assert_allclose(double.h_conv.values, single.h_conv.values, rtol=10 * single.config.epsilon_h)
    assert double.iterations_used < single.iterations_used


def test_two_step_still_fails_at_large_coupling():
    result, _ = two_step_run(SolverConfig(lam=0.10, n_max=55))
    assert not result.converged


def test_warm_start_is_faster(run_001):
    previous, _ = run_001
    target = SolverConfig(lam=0.012, n_max=55)
    cold, _ = run(target)
    warm, _ = warm_start_run(target, previous)
    assert warm.converged and cold.converged
    assert warm.iterations_used < cold.iterations_used


def test_warm_start_from_own_fixed_point():
    cfg = SolverConfig(lam=0.01, n_max=31, freeze=False, epsilon_h=1e-12, max_iterations=500)
    fixed, _ = run(cfg)
    again, _ = warm_start_run(replace(cfg, epsilon_h=1e-10), fixed)
    assert again.converged and again.iterations_used == 1


def test_warm_start_reconciles_n_max(run_001):
    previous, _ = run_001
    for n_max in (31, 61):
        result, trace = warm_start_run(SolverConfig(lam=0.01, n_max=n_max), previous)
        assert result.h_conv.n_max == n_max
        assert trace.start[1] == previous.h_conv[1]


def test_reconcile():
    h0, _ = fundamental_sequence(0.02, 11)
    assert reconcile(h0, 0.02, 11) is h0
    assert reconcile(h0, 0.02, 7).values.tolist() == h0.values[:4].tolist()
    longer = reconcile(h0, 0.02, 15)
    assert longer.values[:6].tolist() == h0.values.tolist()
    assert longer[15] == fundamental_sequence(0.02, 15)[0][15]


def test_nu_conv_dict(run_001):
    result, _ = run_001
    d = result.nu_conv_dict()
    assert list(d) == list(result.h_conv.levels)
    assert all(isinstance(v, int) for v in d.values())
