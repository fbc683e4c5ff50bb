"""Discretized TTA state space.

The continuous time-to-accident axis (-inf, 0] is cut into D+2 left-open,
right-closed intervals: one unbounded "free driving" tail below the detection
threshold, D uniform conflict intervals of width ``sigma``, and a terminal
accident interval just below zero.  State indices run 0 (safest) .. D+1
(accident); D+2 is reserved for the trip-terminal state of the extended chain.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

from .errors import ConfigError, DomainError

#: Sentinel for "no collision course" (TTA = -inf).
NO_CONFLICT = float("-inf")

_SPAN_TOL = 1e-9


@dataclass(frozen=True)
class StateSpaceConfig:
    """Thresholds and resolution of the discrete risk state space.

    Attributes
    ----------
    thrd_detect : float
        Detection threshold in seconds (> 0).  TTA below ``-thrd_detect``
        is free driving.
    thrd_conflict : float
        Nominal conflict threshold in seconds, kept for documentation; the
        operative conflict index is derived per task via
        :func:`threshold_to_state`.
    thrd_deadline : float
        Deadline threshold in seconds (> 0).  TTA above ``-thrd_deadline``
        means the accident is no longer avoidable.
    sigma : float
        Width of each conflict interval in seconds.
    d_count : int
        Number of conflict intervals D; ``d_count * sigma`` must equal
        ``thrd_detect - thrd_deadline``.
    delta : float
        Sampling period of the data frames in seconds; must satisfy
        ``sigma > delta``.
    """

    thrd_detect: float
    thrd_conflict: float
    thrd_deadline: float
    sigma: float
    d_count: int
    delta: float

    def __post_init__(self):
        if not (0.0 < self.thrd_deadline < self.thrd_conflict < self.thrd_detect):
            raise ConfigError(
                "thresholds must satisfy 0 < thrd_deadline < thrd_conflict < thrd_detect, "
                f"got deadline={self.thrd_deadline}, conflict={self.thrd_conflict}, "
                f"detect={self.thrd_detect}"
            )
        if self.sigma <= 0 or self.delta <= 0:
            raise ConfigError("sigma and delta must be positive")
        if not self.sigma > self.delta:
            raise ConfigError(f"sigma ({self.sigma}) must exceed delta ({self.delta})")
        if self.d_count < 1:
            raise ConfigError("d_count must be a positive integer")
        span = self.thrd_detect - self.thrd_deadline
        if abs(self.d_count * self.sigma - span) > _SPAN_TOL:
            raise ConfigError(
                f"d_count * sigma = {self.d_count * self.sigma} does not equal "
                f"thrd_detect - thrd_deadline = {span}"
            )

    @classmethod
    def from_thresholds(cls, thrd_detect, thrd_conflict, thrd_deadline, sigma, delta):
        """Build a config, deriving D from the thresholds and interval width."""
        span = thrd_detect - thrd_deadline
        if sigma <= 0:
            raise ConfigError("sigma must be positive")
        d_count = round(span / sigma)
        if d_count < 1 or abs(d_count * sigma - span) > _SPAN_TOL:
            raise ConfigError(
                f"sigma={sigma} does not evenly divide thrd_detect - thrd_deadline = {span}"
            )
        return cls(thrd_detect, thrd_conflict, thrd_deadline, sigma, d_count, delta)

    @classmethod
    def default(cls):
        """Default experiment configuration: states 0..9 at 0.2 s resolution, 15 fps."""
        return cls.from_thresholds(
            thrd_detect=2.2, thrd_conflict=1.4, thrd_deadline=0.6,
            sigma=0.2, delta=1.0 / 15.0,
        )

    @property
    def n_states(self) -> int:
        """Number of states of the base chain (0 .. D+1)."""
        return self.d_count + 2

    @property
    def accident_state(self) -> int:
        return self.d_count + 1

    @property
    def terminal_state(self) -> int:
        """Index of the trip-terminal state used by the extended chain."""
        return self.d_count + 2


def build_state_space(cfg: StateSpaceConfig) -> list[tuple[float, float]]:
    """Return the D+2 left-open right-closed intervals (lo, hi] of the state space."""
    bounds = [-cfg.thrd_detect + i * cfg.sigma for i in range(cfg.d_count + 1)]
    bounds[-1] = -cfg.thrd_deadline  # exact, avoids accumulated rounding
    intervals = [(NO_CONFLICT, -cfg.thrd_detect)]
    intervals += [(bounds[i], bounds[i + 1]) for i in range(cfg.d_count)]
    intervals.append((-cfg.thrd_deadline, 0.0))
    return intervals


def _interior_bounds(cfg: StateSpaceConfig) -> list[float]:
    # upper bounds of conflict intervals 1..D
    ub = [-cfg.thrd_detect + i * cfg.sigma for i in range(1, cfg.d_count + 1)]
    ub[-1] = -cfg.thrd_deadline
    return ub


def tta_to_state(tta: float, cfg: StateSpaceConfig) -> int:
    """Map a TTA value (seconds, <= 0 or NO_CONFLICT) to its state index.

    Intervals are right-closed: a value exactly on a boundary belongs to the
    interval below it.  "Exactly" allows a relative tolerance of 1e-9 interval
    widths, because boundaries are sums of decimal fractions (e.g. -2.2 + 4 *
    0.2 differs from -1.4 by one ulp) and a value meant to sit on a boundary
    must not leak into the interval above.
    """
    if math.isnan(tta) or tta > 0:
        raise DomainError(f"TTA must be <= 0 or NO_CONFLICT, got {tta}")
    tol = cfg.sigma * 1e-9
    if tta <= -cfg.thrd_detect + tol:  # includes NO_CONFLICT
        return 0
    if tta > -cfg.thrd_deadline + tol:
        return cfg.d_count + 1
    ub = _interior_bounds(cfg)
    idx = bisect_left(ub, tta)
    if idx > 0 and tta - ub[idx - 1] <= tol:
        idx -= 1
    return min(idx, cfg.d_count - 1) + 1


def threshold_to_state(c_seconds: float, cfg: StateSpaceConfig) -> int:
    """Conflict row index for a TTC threshold of ``c_seconds``.

    The controller evades whenever the measured TTC drops below the
    threshold, i.e. whenever TTA exceeds ``-c_seconds``, so the conflict
    index is the first state whose interval lies above ``-c_seconds``.  A
    threshold exactly on an interval boundary therefore maps to the state
    *above* the boundary: the detection threshold itself gives index 1, one
    interval width less gives index 2, and so on.
    """
    if not (cfg.thrd_deadline < c_seconds <= cfg.thrd_detect):
        raise DomainError(
            f"threshold {c_seconds} s outside (thrd_deadline, thrd_detect] = "
            f"({cfg.thrd_deadline}, {cfg.thrd_detect}]"
        )
    # whole intervals between the detection threshold and the TTC threshold,
    # snapping near-integer ratios (decimal thresholds rarely divide exactly)
    pos = (cfg.thrd_detect - c_seconds) / cfg.sigma
    return min(math.floor(pos + 1e-9) + 1, cfg.d_count)


def representative_tta(state: int, cfg: StateSpaceConfig) -> float:
    """Finite TTA value standing in for a state when a histogram is read as a distribution.

    Conflict states use their interval midpoint; the free-driving tail is
    capped one interval width beyond the detection threshold; the accident
    interval uses half the deadline threshold.
    """
    if not 0 <= state <= cfg.d_count + 1:
        raise DomainError(f"state {state} outside 0..{cfg.d_count + 1}")
    if state == 0:
        return -(cfg.thrd_detect + cfg.sigma)
    if state == cfg.d_count + 1:
        return -cfg.thrd_deadline / 2.0
    lo, hi = build_state_space(cfg)[state]
    return (lo + hi) / 2.0
