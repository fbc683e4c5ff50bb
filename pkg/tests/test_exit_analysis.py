import math

import numpy as np
import pytest

from ttarisk import (
    EXTENDED,
    MODIFIED,
    ChainParams,
    ConfigError,
    DomainError,
    ExitSolution,
    InfiniteExitTimeError,
    NoExitError,
    TrafficEnv,
    TransitionMatrix,
    accident_frequency,
    build_extended_matrix,
    build_modified_matrix,
    conditional_accident_time,
    exit_probability,
    exit_time,
    free_state_probs,
    mc_exit_oracle,
    trip_end_prob,
)

DELTA = 1.0 / 15.0


def default_matrices(alpha=0.02, beta=0.34, c=4, d_count=8, flow_q=1500.0):
    env = TrafficEnv(flow_q=flow_q)
    p0, q0 = free_state_probs(env)
    p3 = trip_end_prob(807.0, 54.0, DELTA)
    params = ChainParams(alpha=alpha, beta=beta, c=c, d_count=d_count)
    return (
        build_modified_matrix(params, p0, q0),
        build_extended_matrix(params, env, p3),
    )


def harmonicity_residual_h(m: TransitionMatrix, h: np.ndarray) -> float:
    n = m.dimension
    res = 0.0
    for x in range(n - 2):
        res = max(res, abs(h[x] - float(m.rows[x] @ h)))
    return res


def harmonicity_residual_g(m: TransitionMatrix, g: np.ndarray) -> float:
    n = m.dimension
    scale = max(1.0, float(np.max(np.abs(g))))
    res = 0.0
    for x in range(n - 1):
        res = max(res, abs(g[x] - 1.0 - float(m.rows[x] @ g)) / scale)
    return res


class TestExitProbability:
    def test_boundaries(self):
        _, ext = default_matrices()
        h = exit_probability(ext)
        assert h[9] == 1.0
        assert h[10] == 0.0
        assert np.all(h >= 0.0) and np.all(h <= 1.0)

    def test_harmonic(self):
        _, ext = default_matrices()
        h = exit_probability(ext)
        assert harmonicity_residual_h(ext, h) < 1e-10

    def test_monotone_in_danger(self):
        _, ext = default_matrices()
        h = exit_probability(ext)
        assert all(h[i] <= h[i + 1] + 1e-12 for i in range(1, 9))

    def test_requires_extended(self):
        mod, _ = default_matrices()
        with pytest.raises(ConfigError):
            exit_probability(mod)

    def test_alpha_zero_gives_zero_on_transients(self):
        _, ext = default_matrices(alpha=0.0, beta=0.2, c=4)
        h = exit_probability(ext)
        assert np.all(h[:9] == 0.0)
        assert h[9] == 1.0

    def test_no_exit_at_all(self):
        env = TrafficEnv()
        params = ChainParams(alpha=0.0, beta=0.2, c=4, d_count=8)
        ext = build_extended_matrix(params, env, 0.0)
        with pytest.raises(NoExitError):
            exit_probability(ext)


class TestExitTime:
    def test_boundary_and_positivity(self):
        mod, _ = default_matrices()
        g = exit_time(mod)
        assert g[9] == 0.0
        assert np.all(g[:9] > 0.0)

    def test_harmonic(self):
        mod, _ = default_matrices()
        g = exit_time(mod)
        assert harmonicity_residual_g(mod, g) < 1e-10

    def test_requires_modified(self):
        _, ext = default_matrices()
        with pytest.raises(ConfigError):
            exit_time(ext)

    def test_alpha_zero_infinite(self):
        mod, _ = default_matrices(alpha=0.0, beta=0.2, c=4)
        with pytest.raises(InfiniteExitTimeError):
            exit_time(mod)

    def test_geometric_toy_chain(self):
        # single transient state: stay 0.5, exit 0.5 -> expected 2 steps
        m = TransitionMatrix(MODIFIED, 0, np.array([[0.5, 0.5], [0.0, 1.0]]))
        g = exit_time(m)
        assert g[0] == pytest.approx(2.0)

    def test_seconds_conversion(self):
        mod, _ = default_matrices()
        sol = ExitSolution(h=np.zeros(11), g=exit_time(mod), delta=DELTA)
        assert sol.g_seconds()[0] == pytest.approx(sol.g[0] / 15.0)


class TestConditionalAccidentTime:
    def test_bounded_by_reachability(self):
        _, ext = default_matrices()
        u = conditional_accident_time(ext)
        assert u[9] == 0.0
        assert math.isnan(u[10])
        assert np.all(u[:9] > 0.0)

    def test_nan_when_accident_unreachable(self):
        _, ext = default_matrices(alpha=0.0, beta=0.2, c=4)
        u = conditional_accident_time(ext)
        assert all(math.isnan(v) for v in u[:9])


class TestAccidentFrequency:
    def test_unit_anchor(self):
        # 54000 steps of 1/15 s = 3600 s -> one event per hour
        assert accident_frequency(54000.0, DELTA) == pytest.approx(1.0)

    def test_reciprocal_scaling(self):
        assert accident_frequency(108000.0, DELTA) == pytest.approx(0.5)

    def test_domain(self):
        with pytest.raises(DomainError):
            accident_frequency(0.0, DELTA)
        with pytest.raises(DomainError):
            accident_frequency(100.0, 0.0)


class TestMcOracle:
    def test_deterministic_two_step_chain(self):
        rows = np.zeros((3, 3))
        rows[0, 1] = 1.0
        rows[1, 2] = 1.0
        rows[2, 2] = 1.0
        m = TransitionMatrix(MODIFIED, 1, rows)
        h_hat, g_hat = mc_exit_oracle(m, 0, 1000, 7)
        assert h_hat.mean == 1.0 and h_hat.std_error == 0.0
        assert g_hat.mean == 2.0 and g_hat.std_error == 0.0

    def test_same_seed_bit_identical(self):
        mod, _ = default_matrices(c=8)
        a = mc_exit_oracle(mod, 0, 20000, 99)
        b = mc_exit_oracle(mod, 0, 20000, 99)
        assert a == b

    def test_seed_changes_estimate(self):
        mod, _ = default_matrices(c=8)
        a = mc_exit_oracle(mod, 0, 20000, 99)
        b = mc_exit_oracle(mod, 0, 20000, 100)
        assert (a[0].mean, a[1].mean) != (b[0].mean, b[1].mean)

    def test_start_at_absorbing_state(self):
        _, ext = default_matrices()
        h_hat, g_hat = mc_exit_oracle(ext, 9, 100, 1)
        assert h_hat.mean == 1.0
        h_hat, _ = mc_exit_oracle(ext, 10, 100, 1)
        assert h_hat.mean == 0.0

    def test_runs_required(self):
        mod, _ = default_matrices()
        with pytest.raises(DomainError):
            mc_exit_oracle(mod, 0, 0, 1)

    def test_agreement_on_fast_chain(self):
        # c = D makes the accident a few bounce steps away, so 1e5 walks run
        # in well under a second and pin both estimators tightly.
        mod, ext = default_matrices(c=8)
        g = exit_time(mod)
        h = exit_probability(ext)
        h_hat, _ = mc_exit_oracle(ext, 0, 100000, 2026)
        _, g_hat = mc_exit_oracle(mod, 0, 100000, 2026)
        assert abs(h[0] - h_hat.mean) <= 3.0 * max(h_hat.std_error, 1e-5)
        assert abs(g[0] - g_hat.mean) <= 3.0 * g_hat.std_error
