"""Risk-state transition matrices and their traffic coupling.

Three matrix shapes are produced:

* ``ideal`` -- deterministic tension/relaxation around the conflict row, no
  errors or delays; the conflict row is absorbing by construction.
* ``modified`` -- error probability ``alpha`` and delay probability ``beta``
  perturb every conflict row; the accident state D+1 is the unique absorbing
  state.
* ``extended`` -- adds a trip-terminal state D+2 reached from free driving
  with probability ``p3``, giving two competing exits.

The free-driving row couples to traffic through the equilibrium speed-density
relation (Greenshields): ``p0`` is the probability that the smooth cruising
speed exceeds the speed limit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import ConfigError, DomainError, InfeasibleFlowError

IDEAL = "ideal"
MODIFIED = "modified"
EXTENDED = "extended"

_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ChainParams:
    """Error/delay probabilities and conflict row of the risk chain."""

    alpha: float
    beta: float
    c: int
    d_count: int

    def __post_init__(self):
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ConfigError("alpha and beta must be non-negative")
        if self.gamma > 1.0:
            raise ConfigError(f"gamma = alpha + beta = {self.gamma} exceeds 1")
        if self.d_count < 1:
            raise ConfigError("d_count must be a positive integer")
        if not (1 <= self.c <= self.d_count):
            raise ConfigError(f"conflict row c = {self.c} outside 1..{self.d_count}")

    @property
    def gamma(self) -> float:
        return self.alpha + self.beta


def flow_to_density(q: float, env: "TrafficEnv") -> float:
    """Uncongested density (veh/km) carrying flow ``q`` (veh/h) under Greenshields.

    Solves ``q = k * u_e(k)`` and returns the smaller root.  The parabola tops
    out at ``q_max = u_free * k_jam / 4``.
    """
    q_max = env.u_free * env.k_jam / 4.0
    if q < 0.0:
        raise InfeasibleFlowError(f"flow must be non-negative, got {q}")
    if q > q_max * (1.0 + 1e-12):
        raise InfeasibleFlowError(f"flow {q} veh/h exceeds capacity {q_max} veh/h")
    disc = max(env.k_jam * env.k_jam - 4.0 * q * env.k_jam / env.u_free, 0.0)
    return (env.k_jam - math.sqrt(disc)) / 2.0


@dataclass(frozen=True)
class TrafficEnv:
    """Road and flow context: speed limit, fundamental-diagram parameters, noise.

    ``density_k`` may be omitted, in which case it is derived from ``flow_q``
    via the uncongested branch of the fundamental diagram.
    """

    flow_q: float = 1500.0
    u_max: float = 60.0
    u_free: float = 60.0
    k_jam: float = 120.0
    speed_noise_sd: float = 5.0
    density_k: float | None = None

    def __post_init__(self):
        if self.u_free <= 0.0 or self.k_jam <= 0.0:
            raise ConfigError("u_free and k_jam must be positive")
        if self.flow_q < 0.0:
            raise ConfigError("flow_q must be non-negative")
        if self.speed_noise_sd < 0.0:
            raise ConfigError("speed_noise_sd must be non-negative")
        if self.density_k is None:
            object.__setattr__(self, "density_k", flow_to_density(self.flow_q, self))
        if not (0.0 <= self.density_k <= self.k_jam):
            raise ConfigError(f"density {self.density_k} outside [0, {self.k_jam}]")


def equilibrium_speed(k: float, env: TrafficEnv) -> float:
    """Greenshields equilibrium speed u_free * (1 - k / k_jam), in km/h."""
    if not (0.0 <= k <= env.k_jam):
        raise DomainError(f"density {k} outside [0, {env.k_jam}]")
    return env.u_free * (1.0 - k / env.k_jam)


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def free_state_probs(env: TrafficEnv) -> tuple[float, float]:
    """(p0, q0): probabilities that the smooth speed exceeds / respects the limit.

    ``p0`` is the probability of staying in free driving: while the ambient
    stream moves faster than the follower's limit, the follower cannot catch
    a leader.  ``q0 = 1 - p0`` is the chance of entering the first conflict
    state.  The smooth speed is modeled as normal around the equilibrium
    speed with standard deviation ``speed_noise_sd``; a zero deviation
    degenerates to a deterministic comparison.  Denser traffic has a lower
    equilibrium speed, so p0 is non-increasing in the density.
    """
    u_e = equilibrium_speed(env.density_k, env)
    if env.speed_noise_sd == 0.0:
        p0 = 1.0 if u_e > env.u_max else 0.0
    else:
        p0 = _normal_sf((env.u_max - u_e) / env.speed_noise_sd)
    return p0, 1.0 - p0


def trip_end_prob(section_length_m: float, mean_speed_kmh: float, delta: float) -> float:
    """Per-step trip-termination probability of a memoryless trip-end model.

    The expected trip duration is ``section_length / mean_speed``; a geometric
    exit with the matching mean gives ``p3 = delta / E[trip duration]``.
    """
    if section_length_m <= 0.0 or mean_speed_kmh <= 0.0 or delta <= 0.0:
        raise DomainError("section length, mean speed and delta must be positive")
    mean_duration_s = section_length_m / (mean_speed_kmh / 3.6)
    p3 = delta / mean_duration_s
    if p3 >= 1.0:
        raise DomainError(f"trip-end probability {p3} >= 1; delta too coarse for the trip")
    return p3


@dataclass(frozen=True)
class TransitionMatrix:
    """Immutable row-stochastic matrix of one of the three shapes."""

    kind: str
    d_count: int
    rows: np.ndarray

    def __post_init__(self):
        if self.kind not in (IDEAL, MODIFIED, EXTENDED):
            raise ConfigError(f"unknown matrix kind {self.kind!r}")
        rows = np.array(self.rows, dtype=float)
        expected = self.d_count + (3 if self.kind == EXTENDED else 2)
        if rows.shape != (expected, expected):
            raise ConfigError(f"{self.kind} matrix must be {expected}x{expected}, got {rows.shape}")
        if np.any(rows < 0.0) or np.any(rows > 1.0):
            raise ConfigError("matrix entries must lie in [0, 1]")
        err = np.abs(rows.sum(axis=1) - 1.0).max()
        if err > _ROW_SUM_TOL:
            raise ConfigError(f"rows must sum to 1, worst error {err}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def dimension(self) -> int:
        return self.rows.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "dimension": self.dimension, "rows": self.rows.tolist()},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "TransitionMatrix":
        obj = json.loads(text)
        rows = np.array(obj["rows"], dtype=float)
        if rows.shape[0] != obj["dimension"]:
            raise ConfigError("dimension field does not match rows")
        d_count = obj["dimension"] - (3 if obj["kind"] == EXTENDED else 2)
        return cls(kind=obj["kind"], d_count=d_count, rows=rows)


def _check_p0_q0(p0: float, q0: float) -> None:
    if not (0.0 <= p0 <= 1.0 and 0.0 <= q0 <= 1.0):
        raise ConfigError(f"p0={p0}, q0={q0} must be probabilities")
    if abs(p0 + q0 - 1.0) > 1e-9:
        raise ConfigError(f"p0 + q0 = {p0 + q0} must equal 1")


def build_ideal_matrix(params: ChainParams, p0: float, q0: float) -> TransitionMatrix:
    """Deterministic chain: tension rows advance, relaxation rows retreat,
    the conflict row is absorbing (written verbatim; only the modified and
    extended shapes are used downstream)."""
    _check_p0_q0(p0, q0)
    d, c = params.d_count, params.c
    m = np.zeros((d + 2, d + 2))
    m[0, 0], m[0, 1] = p0, 1.0 - p0
    for i in range(1, c):
        m[i, i + 1] = 1.0
    m[c, c] = 1.0
    for i in range(c + 1, d + 1):
        m[i, i - 1] = 1.0
    m[d + 1, d + 1] = 1.0
    return TransitionMatrix(IDEAL, d, m)


def _fill_perturbed_rows(m: np.ndarray, params: ChainParams) -> None:
    a, b, g = params.alpha, params.beta, params.gamma
    d, c = params.d_count, params.c
    for i in range(1, c):  # tension: drift toward the conflict row
        m[i, i - 1], m[i, i], m[i, i + 1] = a, b, 1.0 - g
    m[c, c - 1], m[c, c], m[c, c + 1] = g / 2.0, 1.0 - g, g / 2.0
    for i in range(c + 1, d + 1):  # relaxation: drift back toward the conflict row
        m[i, i - 1], m[i, i], m[i, i + 1] = 1.0 - g, b, a


def build_modified_matrix(params: ChainParams, p0: float, q0: float) -> TransitionMatrix:
    """Error/delay-perturbed chain with the accident state D+1 absorbing."""
    _check_p0_q0(p0, q0)
    d = params.d_count
    m = np.zeros((d + 2, d + 2))
    m[0, 0], m[0, 1] = p0, 1.0 - p0
    _fill_perturbed_rows(m, params)
    m[d + 1] = 0.0
    m[d + 1, d + 1] = 1.0
    return TransitionMatrix(MODIFIED, d, m)


def build_extended_matrix(params: ChainParams, env: TrafficEnv, p3: float) -> TransitionMatrix:
    """Perturbed chain with a trip-terminal state D+2 competing with the accident.

    The free-driving row splits its mass as ``p1 = p0 * (1 - p3)`` (stay),
    ``p2 = q0 * (1 - p3)`` (contact) and ``p3`` (trip ends).
    """
    if not (0.0 <= p3 < 1.0):
        raise ConfigError(f"p3 = {p3} must lie in [0, 1)")
    p0, q0 = free_state_probs(env)
    d = params.d_count
    m = np.zeros((d + 3, d + 3))
    m[0, 0] = p0 * (1.0 - p3)
    m[0, 1] = (1.0 - p3) - m[0, 0]
    m[0, d + 2] = p3
    _fill_perturbed_rows(m, params)
    m[d + 1] = 0.0
    m[d + 1, d + 1] = 1.0
    m[d + 2, d + 2] = 1.0
    return TransitionMatrix(EXTENDED, d, m)


def classify_states(m) -> tuple[frozenset[int], frozenset[int]]:
    """Partition states into (transient, recurrent) by communicating-class analysis.

    Accepts a :class:`TransitionMatrix` or any row-stochastic square array.
    A state is recurrent iff its strongly connected class has no edge leaving
    the class.
    """
    rows = m.rows if isinstance(m, TransitionMatrix) else np.asarray(m, dtype=float)
    g = nx.DiGraph()
    n = rows.shape[0]
    g.add_nodes_from(range(n))
    src, dst = np.nonzero(rows)
    g.add_edges_from(zip(src.tolist(), dst.tolist()))
    cond = nx.condensation(g)
    recurrent: set[int] = set()
    for node, members in cond.nodes(data="members"):
        if cond.out_degree(node) == 0:
            recurrent.update(members)
    return frozenset(range(n)) - frozenset(recurrent), frozenset(recurrent)
