"""Instantaneous surrogate risk metrics and entropy operations.

TTA (time-to-accident) is the negated time-to-collision: a finite value is
strictly negative, zero means crash, and -inf (``NO_CONFLICT``) means no
collision course.  All entropies are in bits (log base 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    ConfigError,
    DomainError,
    EmptyHistogramError,
    MappingError,
    OverlapError,
    UnboundedSupportError,
)
from .state_space import NO_CONFLICT, StateSpaceConfig, representative_tta

_PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class KinematicState:
    """Position (m), speed (m/s, >= 0) and length (m, > 0) of one vehicle."""

    position: float
    speed: float
    length: float = 5.0

    def __post_init__(self):
        if not math.isfinite(self.position):
            raise DomainError(f"position must be finite, got {self.position}")
        if not (math.isfinite(self.speed) and self.speed >= 0.0):
            raise DomainError(f"speed must be finite and >= 0, got {self.speed}")
        if not (math.isfinite(self.length) and self.length > 0.0):
            raise DomainError(f"length must be finite and > 0, got {self.length}")


def compute_ttc(leader: KinematicState, follower: KinematicState) -> float:
    """TTA of the follower with respect to the leader.

    Returns -(gap / closing speed) when the follower is closing in, a strictly
    negative number; returns ``NO_CONFLICT`` when the gap is opening or
    constant.  The gap is measured front bumper of the follower to rear bumper
    of the leader, ``leader.position - follower.position - follower.length``.

    Raises
    ------
    OverlapError
        If the gap is not positive (vehicles already in collision).
    """
    gap = leader.position - follower.position - follower.length
    if gap <= 0.0:
        raise OverlapError(f"vehicles overlap: gap = {gap} m")
    closing = follower.speed - leader.speed
    if closing <= 0.0:
        return NO_CONFLICT
    return -(gap / closing)


def self_information(p: float) -> float:
    """Shannon self-information -log2(p) in bits, for p in (0, 1]."""
    if not (0.0 < p <= 1.0):
        raise DomainError(f"probability must be in (0, 1], got {p}")
    return -math.log2(p)


@dataclass(frozen=True)
class TtaDistribution:
    """Finite discrete distribution over TTA values (seconds <= 0).

    ``support`` is a sequence of ``(tta, probability)`` pairs.  Probabilities
    must lie in [0, 1] and sum to 1 within 1e-12.  A -inf support point is
    allowed in the container but must carry zero mass before an expectation
    is taken (see :func:`risk_entropy`).
    """

    support: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "support", tuple((float(t), float(p)) for t, p in self.support))
        total = 0.0
        for t, p in self.support:
            if math.isnan(t) or t > 0.0:
                raise DomainError(f"TTA support value must be <= 0, got {t}")
            if not (0.0 <= p <= 1.0):
                raise DomainError(f"probability {p} outside [0, 1]")
            total += p
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise DomainError(f"probabilities sum to {total}, expected 1")


def risk_entropy(dist: TtaDistribution) -> float:
    """Expected TTA of the distribution, in seconds (a value <= 0).

    Raises
    ------
    UnboundedSupportError
        If any probability mass sits at -inf; map NO_CONFLICT mass to a
        finite cap first (see :func:`histogram_to_distribution`).
    """
    acc = 0.0
    for t, p in dist.support:
        if t == NO_CONFLICT and p > 0.0:
            raise UnboundedSupportError(
                "distribution has mass at -inf; map NO_CONFLICT to a finite cap first"
            )
        acc += t * p if p > 0.0 else 0.0
    return acc


@dataclass(frozen=True)
class StateHistogram:
    """Non-negative occupancy counts, one per state index ascending from 0."""

    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.counts) == 0:
            raise DomainError("histogram needs at least one state")
        if any(c < 0 for c in self.counts):
            raise DomainError("histogram counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.counts)


def shannon_entropy(hist: StateHistogram) -> float:
    """Entropy in bits of the normalized state frequencies; empty states contribute 0."""
    total = hist.total
    if total == 0:
        raise EmptyHistogramError("cannot normalize a histogram with zero total count")
    h = 0.0
    for c in hist.counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def coarsen(hist: StateHistogram, merge_map: Mapping[int, int]) -> StateHistogram:
    """Merge histogram states into groups, summing counts.

    ``merge_map`` must map every state index of ``hist`` to a group label, and
    each group must cover a contiguous run of state indices.  Output groups
    are ordered by their smallest member state.
    """
    n = len(hist.counts)
    missing = [i for i in range(n) if i not in merge_map]
    if missing:
        raise MappingError(f"merge map does not cover states {missing}")
    members: dict[int, list[int]] = {}
    for i in range(n):
        members.setdefault(merge_map[i], []).append(i)
    for group, idx in members.items():
        if idx != list(range(idx[0], idx[-1] + 1)):
            raise MappingError(f"group {group!r} covers non-contiguous states {idx}")
    ordered = sorted(members.values(), key=lambda idx: idx[0])
    return StateHistogram(tuple(sum(hist.counts[i] for i in idx) for idx in ordered))


def histogram_to_distribution(hist: StateHistogram, cfg: StateSpaceConfig) -> TtaDistribution:
    """Read a state histogram as a TTA distribution over representative values.

    Conflict states contribute their interval midpoints; state 0 and the
    accident state use the finite caps of :func:`representative_tta`.  The
    histogram length must be D+2 for the given config.
    """
    if len(hist.counts) != cfg.n_states:
        raise DomainError(
            f"histogram has {len(hist.counts)} states, config expects {cfg.n_states}"
        )
    total = hist.total
    if total == 0:
        raise EmptyHistogramError("cannot normalize a histogram with zero total count")
    pairs = [
        (representative_tta(i, cfg), c / total)
        for i, c in enumerate(hist.counts)
    ]
    return TtaDistribution(tuple(pairs))


def read_histogram_csv(path) -> StateHistogram:
    """Read the ``state,count`` CSV schema (UTF-8, LF, ascending state index)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [ln for ln in f.read().split("\n") if ln != ""]
    if not lines or lines[0] != "state,count":
        raise ConfigError(f"{path}: expected header 'state,count'")
    counts = []
    for row, ln in enumerate(lines[1:]):
        try:
            state_s, count_s = ln.split(",")
            state, count = int(state_s), int(count_s)
        except ValueError as exc:
            raise ConfigError(f"{path}: malformed row {ln!r}") from exc
        if state != row:
            raise ConfigError(f"{path}: state indices must ascend from 0, got {state} at row {row}")
        counts.append(count)
    if not counts:
        raise ConfigError(f"{path}: no data rows")
    return StateHistogram(tuple(counts))


def write_histogram_csv(path, hist: StateHistogram) -> None:
    """Write the ``state,count`` CSV schema (UTF-8, LF)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("state,count\n")
        for i, c in enumerate(hist.counts):
            f.write(f"{i},{c}\n")
