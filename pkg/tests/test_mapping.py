from __future__ import annotations

import numpy as np
import pytest

from phi4zero.mapping import (
    DegenerateError,
    SweepConfig,
    SweepOrder,
    apply_mstar,
    d_n,
    delta1_prime,
    delta3_prime,
)
from phi4zero.model import (
    ClosureMode,
    GreenSequence,
    check_signs,
    eom_residual,
    fundamental_sequence,
    term_C,
)
from phi4zero.series import series_eval, series_solve
from phi4zero.solver import SolverConfig, run


def test_delta1_prime():
    assert delta1_prime(GreenSequence([1.0, -0.06, 0.1])) == 0.06
    assert delta1_prime(GreenSequence([1.0, 0.0, 0.1])) == 0.0
    h0, _ = fundamental_sequence(0.01, 7)
    assert delta1_prime(h0) == pytest.approx(0.0601081, rel=1e-6)


def test_delta3_prime_examples():
    h = GreenSequence([1.0, -0.06, 0.0])
    assert delta3_prime(h, 0.01) == pytest.approx(0.06 / 1.09, rel=1e-14)
    with pytest.raises(DegenerateError):
        delta3_prime(GreenSequence([1.0, 0.0, 0.1]), 0.01)


@pytest.mark.parametrize("lam", [1e-4, 1e-6, 1e-8])
def test_delta3_prime_small_coupling_limit(lam):
    h = GreenSequence([1.0, -6 * lam, 0.3 * lam**2])
    assert delta3_prime(h, lam) / lam == pytest.approx(6.0, rel=20 * lam)


def test_delta3_prime_against_series():
    lam = 1e-3
    s = series_solve(9, 3)
    h = GreenSequence([series_eval(s[n], lam) for n in (1, 3, 5, 7, 9)])
    # series delta_3 = -H4/(H2)^3; the map at this point must agree to O(lam^3)
    expected = -h[3] / h[1] ** 3
    assert delta3_prime(h, lam) == pytest.approx(expected, rel=1e-5)


def test_d_n_examples():
    lam = 0.01
    # construct |B| = |A| at n = 5: A = -lam H^8, B = -3 lam (5 H^6 H^2 + 10 H^4 H^4)
    h2, h4, h6 = 1.0, -0.05, 0.2
    b = 3 * lam * (5 * h6 * h2 + 10 * h4 * h4)
    h = GreenSequence([h2, h4, h6, -b / lam])
    assert d_n(h, 5, lam) == pytest.approx(0.0, abs=1e-15)

    # B = -0.2, A = 0.1, H^6 = 0.05 gives D = 2
    h8 = -0.1 / lam
    h6 = 0.05
    # choose H^2 so that -3 lam (5 H^6 H^2 + 10 H^4^2) = -0.2 with H^4 = 0
    h2 = 0.2 / (3 * lam * 5 * h6)
    h = GreenSequence([h2, 0.0, h6, h8])
    assert d_n(h, 5, lam) == pytest.approx(2.0, rel=1e-13)

    with pytest.raises(DegenerateError):
        d_n(GreenSequence([1.0, -0.06, 0.0, 0.0]), 5, lam)
    with pytest.raises(ValueError):
        d_n(h, 3, lam)


def test_apply_mstar_first_components():
    lam = 0.01
    h0, _ = fundamental_sequence(lam, 55)
    out = apply_mstar(h0, lam)
    assert out.ok
    assert out.h_next[1] == pytest.approx(1 - lam * h0[3], rel=1e-15)
    assert out.h_next[1] == pytest.approx(1.000601081, rel=1e-9)
    assert out.h_next[3] == pytest.approx(-delta3_prime(h0, lam) * out.h_next[1] ** 3, rel=1e-15)
    assert set(out.d_values) == set(range(5, 56, 2))
    assert check_signs(out.h_next).passed


def test_upward_sweep_reads_updated_components():
    lam = 0.02
    h = GreenSequence([1.0, -0.1, 0.3, 0.0])
    out = apply_mstar(h, lam, SweepConfig(SweepOrder.UPWARD))
    updated = GreenSequence([out.values[0], out.values[1], 0.0, 0.0])
    d5 = out.deltas[2]
    assert out.values[2] == pytest.approx(d5 * term_C(updated, 5, lam) / (3 * lam * 20), rel=1e-14)
    jac = apply_mstar(h, lam, SweepConfig(SweepOrder.JACOBI))
    assert jac.values[2] == pytest.approx(d5 * term_C(h, 5, lam) / (3 * lam * 20), rel=1e-14)
    assert jac.values[0] == out.values[0] and jac.values[1] == out.values[1]


def test_apply_mstar_is_deterministic():
    h0, _ = fundamental_sequence(0.05, 55)
    a = apply_mstar(h0, 0.05)
    b = apply_mstar(h0, 0.05)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.deltas, b.deltas)


def test_degenerate_sweep_is_reported():
    h = GreenSequence([1.0, -0.06, 0.3, 0.0, 0.1])
    out = apply_mstar(h, 0.01)
    assert not out.ok and 7 in out.degenerate
    with pytest.raises(DegenerateError):
        out.h_next


def test_sweep_config_coerces_strings():
    cfg = SweepConfig("jacobi", "fundamental")
    assert cfg.order is SweepOrder.JACOBI and cfg.closure is ClosureMode.FUNDAMENTAL
    with pytest.raises(ValueError):
        SweepConfig("sideways")


@pytest.fixture(scope="module")
def unfrozen_fixed_point():
    result, _ = run(SolverConfig(lam=0.01, n_max=31, freeze=False, epsilon_h=1e-13, max_iterations=500))
    assert result.converged
    return result.h_conv


def test_fixed_point_is_reproduced(unfrozen_fixed_point):
    h = unfrozen_fixed_point
    out = apply_mstar(h, 0.01)
    np.testing.assert_allclose(out.values, h.values, rtol=1e-10)


def test_fixed_point_solves_the_equations(unfrozen_fixed_point):
    res = eom_residual(unfrozen_fixed_point, 0.01)
    assert res.max_relative(range(1, 30, 2)) < 1e-8


def test_sweep_orders_agree_at_fixed_point(unfrozen_fixed_point):
    h = unfrozen_fixed_point
    up = apply_mstar(h, 0.01, SweepConfig("upward"))
    jac = apply_mstar(h, 0.01, SweepConfig("jacobi"))
    np.testing.assert_allclose(up.values, jac.values, rtol=1e-10)


def test_sweep_orders_agree_to_first_order():
    # near the fixed point the two orders differ by much less than the update itself
    result, _ = run(SolverConfig(lam=0.01, n_max=31, max_iterations=5, freeze=False))
    h = result.h_conv
    up = apply_mstar(h, 0.01, SweepConfig("upward")).values
    jac = apply_mstar(h, 0.01, SweepConfig("jacobi")).values
    step = np.max(np.abs(up / h.values - 1))
    assert np.max(np.abs(up / jac - 1)) < step
