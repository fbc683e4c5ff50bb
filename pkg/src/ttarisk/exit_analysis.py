"""Accident exit probability and exit time of the risk chain.

First-step analysis on transient states gives two linear systems:

* exit probability ``h``: ``(I - Q) h_T = r`` on the extended chain, where
  ``Q`` is the transient block and ``r`` the one-step accident column;
  boundaries ``h(D+1) = 1``, ``h(D+2) = 0``.
* exit time ``g``: ``(I - Q) g_T = 1`` on the modified chain, where the
  accident state is the unique absorbing state; ``g(D+1) = 0``, values in
  steps of the sampling period.

A seeded Monte Carlo oracle walks the same chain by brute force and is used
to cross-check the solvers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    InfiniteExitTimeError,
    NoExitError,
    NonAbsorptionError,
)
from .markov_model import EXTENDED, MODIFIED, TransitionMatrix

_COND_WARN = 1e12


@dataclass(frozen=True)
class ExitSolution:
    """Per-state accident probabilities and expected accident times.

    ``h`` has the extended dimension D+3, ``g`` the modified dimension D+2;
    ``delta`` (seconds per step) converts ``g`` to seconds.
    """

    h: np.ndarray
    g: np.ndarray
    delta: float

    def g_seconds(self) -> np.ndarray:
        return self.g * self.delta


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo point estimate with its standard error."""

    mean: float
    std_error: float
    runs: int
    seed: int


def _reaches(rows: np.ndarray, target: int) -> np.ndarray:
    """Boolean vector: which states have a directed path to ``target``."""
    n = rows.shape[0]
    reach = np.zeros(n, dtype=bool)
    reach[target] = True
    frontier = [target]
    preds = [np.nonzero(rows[:, j])[0] for j in range(n)]
    while frontier:
        j = frontier.pop()
        for i in preds[j]:
            if not reach[i] and i != j:
                reach[i] = True
                frontier.append(i)
    return reach


def _solve_transient(rows: np.ndarray, origin: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    a = np.eye(len(origin)) - rows[np.ix_(origin, origin)]
    cond = np.linalg.cond(a)
    if cond > _COND_WARN:
        warnings.warn(f"exit system condition number {cond:.3g} exceeds {_COND_WARN:.0e}")
    return np.linalg.solve(a, rhs)


def exit_probability(ed: TransitionMatrix) -> np.ndarray:
    """Probability, per state, of absorption at the accident state before the terminal.

    Solves the restricted linear system over transient states that can reach
    the accident at all; the remaining transients get the minimal solution 0.

    Raises
    ------
    NoExitError
        If no transient state can reach either exit (alpha = 0 and p3 = 0).
    """
    if ed.kind != EXTENDED:
        raise ConfigError(f"exit_probability requires an extended matrix, got {ed.kind}")
    n = ed.dimension
    acc, term = n - 2, n - 1
    rows = ed.rows
    reach_acc = _reaches(rows, acc)
    reach_term = _reaches(rows, term)
    transients = np.arange(n - 2)
    if not (reach_acc[transients].any() or reach_term[transients].any()):
        raise NoExitError("neither the accident nor the terminal state is reachable")
    h = np.zeros(n)
    h[acc] = 1.0
    origin = transients[reach_acc[transients]]
    if origin.size:
        h[origin] = _solve_transient(rows, origin, rows[origin, acc])
    return h


def exit_time(d: TransitionMatrix) -> np.ndarray:
    """Expected steps, per state, until first arrival at the accident state.

    Raises
    ------
    InfiniteExitTimeError
        If some transient state cannot reach the accident state (alpha = 0),
        making the expectation infinite.
    """
    if d.kind != MODIFIED:
        raise ConfigError(f"exit_time requires a modified matrix, got {d.kind}")
    n = d.dimension
    acc = n - 1
    rows = d.rows
    reach = _reaches(rows, acc)
    transients = np.arange(n - 1)
    if not reach[transients].all():
        unreachable = transients[~reach[transients]].tolist()
        raise InfiniteExitTimeError(
            f"accident state unreachable from states {unreachable}; expected time is infinite"
        )
    g = np.zeros(n)
    g[transients] = _solve_transient(rows, transients, np.ones(n - 1))
    return g


def conditional_accident_time(ed: TransitionMatrix) -> np.ndarray:
    """E[steps to accident | accident happens first] per state, on the extended chain.

    States with zero accident probability get NaN.  Computed from the
    h-weighted system (I - Q) u_T = (P h)_T restricted to transients, with
    u = h * conditional time.
    """
    if ed.kind != EXTENDED:
        raise ConfigError(f"conditional_accident_time requires an extended matrix, got {ed.kind}")
    h = exit_probability(ed)
    n = ed.dimension
    rows = ed.rows
    transients = np.arange(n - 2)
    origin = transients[h[transients] > 0.0]
    u = np.zeros(n)
    if origin.size:
        u[origin] = _solve_transient(rows, origin, h[origin])
    out = np.full(n, math.nan)
    out[n - 2] = 0.0
    positive = h > 0.0
    out[positive & (np.arange(n) != n - 2)] = (
        u[positive & (np.arange(n) != n - 2)] / h[positive & (np.arange(n) != n - 2)]
    )
    return out


def accident_frequency(g0_steps: float, delta: float) -> float:
    """Accidents per hour implied by an expected accident time of ``g0_steps`` steps."""
    if not g0_steps > 0.0:
        raise DomainError(f"expected accident time must be positive, got {g0_steps}")
    if delta <= 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    return 3600.0 / (g0_steps * delta)


def _chunk_sizes(runs: int, n_chunks: int) -> list[int]:
    base, rem = divmod(runs, n_chunks)
    return [base + (1 if i < rem else 0) for i in range(n_chunks)]


def _walk_chunk(rows, start, size, seed, chunk_index, acc, term, step_cap):
    """Simulate one chunk of walkers as an exchangeable population.

    All walkers of the chunk advance in lockstep; the per-state occupancy
    counts evolve by multinomial splits, which has the same law as stepping
    the walkers one by one.  Returns integer sufficient statistics
    (n_acc, n_term, sum_steps_acc, sumsq_steps_acc).
    """
    rng = np.random.default_rng([seed, chunk_index])
    n = rows.shape[0]
    absorbing = [s for s in (acc, term) if s is not None]
    trans = np.array([s for s in range(n) if s not in absorbing])
    p_trans = rows[trans]
    counts = np.zeros(n, dtype=np.int64)
    counts[start] = size
    n_acc = n_term = sum_steps = sumsq_steps = 0
    if start == acc:
        return size, 0, 0, 0
    if term is not None and start == term:
        return 0, size, 0, 0
    t = 0
    while counts[trans].sum() > 0:
        if t >= step_cap:
            raise NonAbsorptionError(f"walkers not absorbed within {step_cap} steps")
        draws = rng.multinomial(counts[trans], p_trans)
        inflow = draws.sum(axis=0)
        t += 1
        new_acc = int(inflow[acc])
        if new_acc:
            n_acc += new_acc
            sum_steps += t * new_acc
            sumsq_steps += t * t * new_acc
        if term is not None:
            n_term += int(inflow[term])
        counts[trans] = inflow[trans]
    return n_acc, n_term, sum_steps, sumsq_steps


def mc_exit_oracle(
    m: TransitionMatrix,
    start: int,
    runs: int,
    seed: int,
    step_cap: int = 10**8,
    n_chunks: int = 4,
) -> tuple[McEstimate, McEstimate]:
    """Brute-force chain walking estimate of exit probability and exit time.

    ``runs`` independent walks start at ``start`` and run to absorption.
    ``h_hat`` is the fraction absorbed at the accident state; ``g_hat`` is the
    mean steps to the accident among accident-absorbed walks (extended chain)
    or among all walks (modified chain, where every walk ends in the
    accident).  Replications are split into ``n_chunks`` deterministic chunks
    seeded from ``(seed, chunk_index)``; chunks may be executed in any order
    or on any number of workers and merge by integer sums, so identical
    ``(seed, runs, n_chunks)`` always yields bit-identical estimates.
    """
    if runs < 1:
        raise DomainError("runs must be >= 1")
    if m.kind == EXTENDED:
        acc, term = m.dimension - 2, m.dimension - 1
    else:
        acc, term = m.dimension - 1, None
    n_chunks = min(n_chunks, runs)
    totals = np.zeros(4, dtype=np.int64)
    for ci, size in enumerate(_chunk_sizes(runs, n_chunks)):
        stats = _walk_chunk(m.rows, start, size, seed, ci, acc, term, step_cap)
        totals += np.array(stats, dtype=np.int64)
    n_acc, n_term, sum_steps, sumsq_steps = (int(v) for v in totals)
    p_hat = n_acc / runs
    h_se = math.sqrt(p_hat * (1.0 - p_hat) / runs)
    h_hat = McEstimate(p_hat, h_se, runs, seed)
    if n_acc == 0:
        g_hat = McEstimate(math.nan, math.nan, runs, seed)
    else:
        mean = sum_steps / n_acc
        if n_acc > 1:
            var = max(sumsq_steps - n_acc * mean * mean, 0.0) / (n_acc - 1)
            g_se = math.sqrt(var / n_acc)
        else:
            g_se = 0.0
        g_hat = McEstimate(mean, g_se, runs, seed)
    return h_hat, g_hat
