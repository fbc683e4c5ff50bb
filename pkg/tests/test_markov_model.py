import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ttarisk import (
    EXTENDED,
    IDEAL,
    MODIFIED,
    ChainParams,
    ConfigError,
    DomainError,
    InfeasibleFlowError,
    TrafficEnv,
    TransitionMatrix,
    build_extended_matrix,
    build_ideal_matrix,
    build_modified_matrix,
    classify_states,
    equilibrium_speed,
    flow_to_density,
    free_state_probs,
    trip_end_prob,
)


def chain_params():
    """Random valid ChainParams (gamma <= 1)."""
    return st.builds(
        lambda d, c_frac, a, g_rest: ChainParams(
            alpha=a,
            beta=g_rest * (1.0 - a),
            c=max(1, min(d, round(c_frac * d))),
            d_count=d,
        ),
        d=st.integers(min_value=1, max_value=24),
        c_frac=st.floats(min_value=0.0, max_value=1.0),
        a=st.floats(min_value=0.0, max_value=0.5),
        g_rest=st.floats(min_value=0.0, max_value=1.0),
    )


class TestFundamentalDiagram:
    def test_equilibrium_anchors(self):
        env = TrafficEnv()
        assert equilibrium_speed(0.0, env) == pytest.approx(60.0)
        assert equilibrium_speed(120.0, env) == pytest.approx(0.0)
        assert equilibrium_speed(60.0, env) == pytest.approx(30.0)

    def test_equilibrium_domain(self):
        with pytest.raises(DomainError):
            equilibrium_speed(-1.0, TrafficEnv())
        with pytest.raises(DomainError):
            equilibrium_speed(121.0, TrafficEnv())

    def test_flow_to_density_anchors(self):
        env = TrafficEnv()
        assert flow_to_density(0.0, env) == pytest.approx(0.0)
        assert flow_to_density(1800.0, env) == pytest.approx(60.0)  # capacity
        assert flow_to_density(1500.0, env) == pytest.approx(60.0 - math.sqrt(600.0))
        assert flow_to_density(1500.0, env) == pytest.approx(35.50510257216822)

    def test_infeasible_flow(self):
        with pytest.raises(InfeasibleFlowError):
            flow_to_density(1801.0, TrafficEnv())
        with pytest.raises(InfeasibleFlowError):
            flow_to_density(-1.0, TrafficEnv())

    @given(st.floats(min_value=0.0, max_value=60.0))
    def test_density_flow_round_trip(self, k):
        env = TrafficEnv()
        q = k * equilibrium_speed(k, env)
        # the square root near the critical density amplifies rounding in q,
        # so the recovered density is only good to ~sqrt(machine epsilon)
        assert flow_to_density(q, env) == pytest.approx(k, abs=1e-5)


class TestFreeStateProbs:
    def test_deterministic_cases(self):
        fast = TrafficEnv(u_max=30.0, density_k=10.0, speed_noise_sd=0.0)  # u_e = 55
        assert free_state_probs(fast) == (1.0, 0.0)
        slow = TrafficEnv(density_k=60.0, speed_noise_sd=0.0)  # u_e = 30 <= 60
        assert free_state_probs(slow) == (0.0, 1.0)

    def test_symmetric_point(self):
        env = TrafficEnv(u_max=30.0, density_k=60.0)  # u_e = u_max
        p0, q0 = free_state_probs(env)
        assert p0 == pytest.approx(0.5)
        assert q0 == pytest.approx(0.5)

    def test_p0_non_increasing_in_density(self):
        env0 = TrafficEnv(u_max=40.0)
        prev = None
        for k in np.linspace(0.0, 120.0, 25):
            p0, q0 = free_state_probs(
                TrafficEnv(u_max=40.0, density_k=float(k), speed_noise_sd=env0.speed_noise_sd)
            )
            assert p0 + q0 == pytest.approx(1.0)
            if prev is not None:
                assert p0 <= prev + 1e-15
            prev = p0


class TestTripEndProb:
    def test_reference_trip(self):
        # 807 m at 54 km/h lasts 53.8 s = 807 frames at 15 fps.
        p3 = trip_end_prob(807.0, 54.0, 1.0 / 15.0)
        assert p3 == pytest.approx(1.0 / 807.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            trip_end_prob(0.0, 54.0, 1.0 / 15.0)
        with pytest.raises(DomainError):
            trip_end_prob(807.0, 0.0, 1.0 / 15.0)
        with pytest.raises(DomainError):
            trip_end_prob(1.0, 3600.0, 10.0)  # p3 >= 1


class TestChainParams:
    def test_gamma(self):
        p = ChainParams(alpha=0.02, beta=0.34, c=4, d_count=8)
        assert p.gamma == pytest.approx(0.36)

    def test_validation(self):
        with pytest.raises(ConfigError):
            ChainParams(alpha=0.7, beta=0.5, c=1, d_count=4)
        with pytest.raises(ConfigError):
            ChainParams(alpha=-0.1, beta=0.2, c=1, d_count=4)
        with pytest.raises(ConfigError):
            ChainParams(alpha=0.1, beta=0.2, c=0, d_count=4)
        with pytest.raises(ConfigError):
            ChainParams(alpha=0.1, beta=0.2, c=5, d_count=4)


class TestIdealMatrix:
    def test_shape_and_pattern(self):
        p = ChainParams(alpha=0.0, beta=0.0, c=4, d_count=8)
        m = build_ideal_matrix(p, 0.3, 0.7)
        assert m.dimension == 10
        assert m.rows[0, 0] == 0.3 and m.rows[0, 1] == 0.7
        assert m.rows[2, 3] == 1.0 and m.rows[2].sum() == 1.0  # tension advances
        assert m.rows[4, 4] == 1.0                              # conflict row absorbing
        assert m.rows[6, 5] == 1.0                              # relaxation retreats
        assert m.rows[9, 9] == 1.0

    def test_p0_q0_checked(self):
        p = ChainParams(alpha=0.0, beta=0.0, c=1, d_count=2)
        with pytest.raises(ConfigError):
            build_ideal_matrix(p, 0.6, 0.6)


class TestModifiedMatrix:
    def test_reference_rows(self):
        p = ChainParams(alpha=0.02, beta=0.34, c=4, d_count=8)
        m = build_modified_matrix(p, 0.3, 0.7)
        assert m.rows[1, 0] == pytest.approx(0.02)
        assert m.rows[1, 1] == pytest.approx(0.34)
        assert m.rows[1, 2] == pytest.approx(0.64)
        assert m.rows[4, 3] == pytest.approx(0.18)
        assert m.rows[4, 4] == pytest.approx(0.64)
        assert m.rows[4, 5] == pytest.approx(0.18)
        assert m.rows[6, 5] == pytest.approx(0.64)  # relaxation drifts back
        assert m.rows[6, 7] == pytest.approx(0.02)
        assert m.rows[9, 9] == 1.0

    def test_zero_gamma_matches_ideal_off_conflict_row(self):
        p = ChainParams(alpha=0.0, beta=0.0, c=4, d_count=8)
        mod = build_modified_matrix(p, 0.3, 0.7).rows
        ideal = build_ideal_matrix(p, 0.3, 0.7).rows
        for i in range(1, 9):
            if i == 4:
                continue
            assert np.array_equal(mod[i], ideal[i])


class TestExtendedMatrix:
    def test_row0_split(self):
        p = ChainParams(alpha=0.02, beta=0.34, c=4, d_count=8)
        env = TrafficEnv(flow_q=1500.0)
        p0, q0 = free_state_probs(env)
        m = build_extended_matrix(p, env, 1.0 / 807.0)
        assert m.dimension == 11
        assert m.rows[0, 0] == pytest.approx(p0 * (1.0 - 1.0 / 807.0))
        assert m.rows[0, 1] == pytest.approx(q0 * (1.0 - 1.0 / 807.0))
        assert m.rows[0, 10] == pytest.approx(1.0 / 807.0)
        assert m.rows[0].sum() == pytest.approx(1.0, abs=1e-15)
        assert m.rows[9, 9] == 1.0 and m.rows[10, 10] == 1.0

    def test_p3_domain(self):
        p = ChainParams(alpha=0.02, beta=0.34, c=4, d_count=8)
        with pytest.raises(ConfigError):
            build_extended_matrix(p, TrafficEnv(), 1.0)


def _expected_pattern(kind, params):
    """Set of (row, col) positions allowed to be nonzero."""
    d, c = params.d_count, params.c
    n = d + (3 if kind == EXTENDED else 2)
    cells = {(0, 0), (0, 1)}
    if kind == EXTENDED:
        cells.add((0, d + 2))
    if kind == IDEAL:
        cells |= {(i, i + 1) for i in range(1, c)}
        cells.add((c, c))
        cells |= {(i, i - 1) for i in range(c + 1, d + 1)}
    else:
        for i in range(1, d + 1):
            cells |= {(i, i - 1), (i, i), (i, i + 1)}
    cells.add((d + 1, d + 1))
    if kind == EXTENDED:
        cells.add((d + 2, d + 2))
    return cells


class TestMatrixInvariants:
    @given(chain_params(), st.floats(min_value=0.0, max_value=1.0),
           st.floats(min_value=0.0, max_value=0.99))
    def test_stochastic_and_sparse(self, params, p0, p3):
        q0 = 1.0 - p0
        env = TrafficEnv()
        for m in (
            build_ideal_matrix(params, p0, q0),
            build_modified_matrix(params, p0, q0),
            build_extended_matrix(params, env, p3),
        ):
            rows = m.rows
            assert np.abs(rows.sum(axis=1) - 1.0).max() <= 1e-12
            assert rows.min() >= 0.0 and rows.max() <= 1.0
            allowed = _expected_pattern(m.kind, params)
            nz = set(zip(*np.nonzero(rows)))
            assert nz <= allowed

    def test_rows_are_read_only(self):
        p = ChainParams(alpha=0.02, beta=0.34, c=4, d_count=8)
        m = build_modified_matrix(p, 0.3, 0.7)
        with pytest.raises(ValueError):
            m.rows[0, 0] = 0.0

    def test_invalid_rows_rejected(self):
        with pytest.raises(ConfigError):
            TransitionMatrix(MODIFIED, 1, np.array([[0.5, 0.4, 0.0], [0, 1, 0], [0, 0, 1]]))
        with pytest.raises(ConfigError):
            TransitionMatrix("weird", 1, np.eye(3))


class TestJsonRoundTrip:
    def test_round_trip(self):
        p = ChainParams(alpha=0.02, beta=0.34, c=4, d_count=8)
        m = build_extended_matrix(p, TrafficEnv(), 1.0 / 807.0)
        again = TransitionMatrix.from_json(m.to_json())
        assert again.kind == m.kind
        assert again.dimension == m.dimension
        assert np.array_equal(again.rows, m.rows)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            TransitionMatrix.from_json(
                '{"kind": "modified", "dimension": 4, "rows": [[1.0]]}'
            )


class TestClassifyStates:
    def test_extended_partition(self):
        p = ChainParams(alpha=0.02, beta=0.34, c=4, d_count=8)
        transient, recurrent = classify_states(build_extended_matrix(p, TrafficEnv(), 0.001))
        assert recurrent == frozenset({9, 10})
        assert transient == frozenset(range(9))

    def test_modified_partition(self):
        p = ChainParams(alpha=0.02, beta=0.34, c=4, d_count=8)
        transient, recurrent = classify_states(build_modified_matrix(p, 0.3, 0.7))
        assert recurrent == frozenset({9})
        assert transient == frozenset(range(9))

    def test_identity_matrix(self):
        transient, recurrent = classify_states(np.eye(1))
        assert recurrent == frozenset({0})
        assert transient == frozenset()

    def test_alpha_zero_modified_accident_isolated(self):
        # Without errors the relaxation rows never advance, so the only
        # closed classes are the conflict bounce and the accident.
        p = ChainParams(alpha=0.0, beta=0.2, c=4, d_count=8)
        transient, recurrent = classify_states(build_modified_matrix(p, 0.3, 0.7))
        assert 9 in recurrent
