"""Frame-stepped car-following simulator.

One trip: the follower enters a road section at rest behind a seeded stream
of ambient leader vehicles cruising at constant speeds drawn around the
equilibrium speed for the task's flow.  Every decision epoch (one state-space
interval width, ``sigma``) the controller maps the current TTA to a risk
state and chooses to approach (accelerate toward its target speed) or evade
(brake, emergency braking in the deepest conflict state).  A delay
probability ``beta`` repeats the previous epoch's action; an error
probability ``alpha`` inverts the decided action.  Kinematics integrate with
constant acceleration per frame of length ``delta``.

Everything is a pure function of the seeds: identical task specs give
bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyTraceError, InfeasibleFlowError, RiskModelError
from .markov_model import TrafficEnv, equilibrium_speed, flow_to_density
from .risk_metrics import KinematicState, StateHistogram
from .state_space import NO_CONFLICT, StateSpaceConfig, tta_to_state, threshold_to_state

APPROACH = "APPROACH"
EVADE = "EVADE"
HOLD = "HOLD"

#: leaders starting this far beyond the section end can never matter
_LEADER_HORIZON_M = 150.0
_MIN_HEADWAY_S = 1.0
_MIN_LEADER_SPACING_M = 6.0
_MAX_TRIP_S = 3600.0


@dataclass(frozen=True)
class TaskSpec:
    """One car-following experiment task."""

    flow_q: float
    ttc_threshold_c: float
    seed: int
    trip_count: int = 200
    section_length: float = 807.0
    u_max: float = 60.0

    def __post_init__(self):
        if self.flow_q <= 0.0:
            raise DomainError("flow_q must be positive")
        if self.trip_count < 1:
            raise DomainError("trip_count must be positive")
        if self.section_length <= 0.0:
            raise DomainError("section_length must be positive")


@dataclass(frozen=True)
class ControllerSettings:
    """Acceleration profile and stimulus-response parameters of the follower."""

    accel: float = 1.5             # m/s^2, approach
    brake: float = -3.0            # m/s^2, evasive
    emergency_brake: float = -6.0  # m/s^2, deepest conflict state
    vehicle_length: float = 5.0    # m
    alpha: float = 0.02
    beta: float = 0.34
    per_frame_randomness: bool = False  # apply alpha/beta per frame instead of per epoch

    def __post_init__(self):
        if self.accel <= 0.0 or self.brake >= 0.0 or self.emergency_brake >= 0.0:
            raise DomainError("accel must be > 0 and brake/emergency_brake < 0")
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise DomainError("alpha and beta must be probabilities")


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    time: float
    leader: KinematicState
    follower: KinematicState
    tta: float
    state: int
    action: str
    delayed: bool
    errored: bool


@dataclass(frozen=True)
class SimulationResult:
    frames: tuple[FrameRecord, ...]
    histogram: StateHistogram
    accidents: int
    trips_completed: int
    empirical_h0: float


def generate_leader_stream(q, seed, env: TrafficEnv, horizon_m: float | None = None):
    """Ambient leader arrivals: (positions at follower entry, constant speeds in m/s).

    Inter-arrival headways are shifted exponential with mean ``3600 / q``
    seconds and minimum headway 1 s; entry speeds are normal around the
    equilibrium speed, clamped to [0, u_max].  Leaders that entered earlier
    sit farther ahead; a minimum spacing keeps the initial layout physical.
    Only leaders within ``horizon_m`` of the section start are generated.
    """
    q_max = env.u_free * env.k_jam / 4.0
    if q <= 0.0 or q > q_max * (1.0 + 1e-12):
        raise InfeasibleFlowError(f"flow {q} veh/h outside (0, {q_max}]")
    mean_headway = 3600.0 / q
    if mean_headway <= _MIN_HEADWAY_S:
        raise InfeasibleFlowError(f"mean headway {mean_headway} s below minimum {_MIN_HEADWAY_S} s")
    if horizon_m is None:
        horizon_m = 2000.0
    rng = np.random.default_rng(seed)
    u_e = equilibrium_speed(flow_to_density(q, env), env)
    times, speeds, positions = [], [], []
    t = 0.0
    prev_pos = 0.0
    while True:
        t += _MIN_HEADWAY_S + rng.exponential(mean_headway - _MIN_HEADWAY_S)
        v_kmh = min(max(u_e + rng.normal(0.0, env.speed_noise_sd), 0.0), env.u_max)
        v = v_kmh / 3.6
        pos = max(v * t, prev_pos + _MIN_LEADER_SPACING_M)
        if pos > horizon_m:
            break
        times.append(t)
        speeds.append(v)
        positions.append(pos)
        prev_pos = pos
    return np.array(positions), np.array(speeds)


class TripWorld:
    """Mutable state of one follower trip; advanced one frame per :func:`step`."""

    __slots__ = (
        "cfg", "controller", "c_state", "c_seconds", "section_length",
        "target_speed", "leader_pos0", "leader_v", "frame", "x", "v",
        "action", "delayed", "errored", "tta", "state", "nearest", "done",
        "accident", "cmd_speed", "decision_stride", "epoch_uniforms",
        "record",
    )

    def __init__(self, task: TaskSpec, cfg: StateSpaceConfig,
                 controller: ControllerSettings, env: TrafficEnv,
                 rng_ctrl: np.random.Generator,
                 leader_pos0: np.ndarray, leader_v: np.ndarray,
                 record: bool = True):
        self.cfg = cfg
        self.controller = controller
        self.c_state = threshold_to_state(task.ttc_threshold_c, cfg)
        self.c_seconds = task.ttc_threshold_c
        self.section_length = task.section_length
        u_e = equilibrium_speed(env.density_k, env)
        target_kmh = min(max(u_e + rng_ctrl.normal(0.0, env.speed_noise_sd), 0.0), task.u_max)
        self.target_speed = target_kmh / 3.6
        self.leader_pos0 = leader_pos0
        self.leader_v = leader_v
        self.frame = 0
        self.x = 0.0
        self.v = 0.0
        self.action = HOLD
        self.delayed = False
        self.errored = False
        self.tta = NO_CONFLICT
        self.state = 0
        self.nearest = -1
        self.done = False
        self.accident = False
        self.cmd_speed = 0.0
        stride = 1 if controller.per_frame_randomness else max(round(cfg.sigma / cfg.delta), 1)
        self.decision_stride = stride
        max_epochs = int(_MAX_TRIP_S / cfg.delta) // stride + 2
        self.epoch_uniforms = rng_ctrl.random((max_epochs, 2))
        self.record = record


def _nearest_leader(world: TripWorld, t: float) -> int:
    pos = world.leader_pos0 + world.leader_v * t
    ahead = np.nonzero(pos > world.x)[0]
    if ahead.size == 0:
        return -1
    return int(ahead[np.argmin(pos[ahead])])


def _tta_against(world: TripWorld, idx: int, t: float) -> float:
    if idx < 0:
        return NO_CONFLICT
    gap = world.leader_pos0[idx] + world.leader_v[idx] * t - world.x - world.controller.vehicle_length
    if gap <= 0.0:
        return 0.0  # overlap; caller turns this into an accident
    closing = world.v - world.leader_v[idx]
    if closing <= 0.0:
        return NO_CONFLICT
    return -(gap / closing)


def step(world: TripWorld, histogram: np.ndarray | None = None) -> FrameRecord | None:
    """Advance one frame of ``delta`` seconds; returns the frame record if recording.

    On decision-epoch frames the controller re-reads the risk state and picks
    an action, subject to the delay and error probabilities; between epochs
    the previous action keeps acting.  The accident state ends the trip.
    """
    if world.done:
        raise RiskModelError("trip already finished")
    cfg = world.cfg
    ctl = world.controller
    delta = cfg.delta
    t = world.frame * delta

    if world.frame % world.decision_stride == 0:
        world.nearest = _nearest_leader(world, t)
        tta_now = _tta_against(world, world.nearest, t)
        state_now = tta_to_state(tta_now, cfg) if tta_now != 0.0 else cfg.accident_state
        decided = APPROACH if state_now < world.c_state else EVADE
        u_delay, u_err = world.epoch_uniforms[world.frame // world.decision_stride]
        delayed = u_delay < ctl.beta
        action = world.action if delayed else decided
        errored = u_err < ctl.alpha
        if errored:
            action = EVADE if action != EVADE else APPROACH
        if action == APPROACH:
            # A fresh, correct approach command is capped by a time-headway
            # rule: no faster than the leader plus the speed that would close
            # the gap within the controller's TTC threshold plus one decision
            # epoch (the command runs open-loop until the next epoch).  A
            # delayed controller keeps acting on its stale command; an
            # erroneous one accelerates toward cruise speed with no cap (it
            # planned the wrong action).  Without the cap the follower
            # ratchets into near-zero gaps and the threshold loses its
            # physical meaning.
            if errored:
                world.cmd_speed = world.target_speed
            elif not (delayed and world.action == APPROACH):
                cmd = world.target_speed
                if world.nearest >= 0:
                    lv = world.leader_v[world.nearest]
                    gap = (world.leader_pos0[world.nearest] + lv * t
                           - world.x - ctl.vehicle_length)
                    horizon = world.c_seconds + cfg.sigma
                    cmd = min(cmd, lv + gap / horizon if gap > 0.0 else lv)
                world.cmd_speed = cmd
        world.action, world.delayed, world.errored = action, delayed, errored

    # constant-acceleration update over one frame
    if world.action == APPROACH:
        dv = min(max(world.cmd_speed - world.v, ctl.brake * delta),
                 ctl.accel * delta)
        v_new = max(world.v + dv, 0.0)
    elif world.action == EVADE:
        a = ctl.emergency_brake if world.state >= cfg.d_count else ctl.brake
        v_new = max(world.v + a * delta, 0.0)
    else:  # HOLD: coast
        v_new = world.v
    world.x += (world.v + v_new) * (0.5 * delta)
    world.v = v_new
    world.frame += 1
    t = world.frame * delta

    tta = _tta_against(world, world.nearest, t)
    if tta == 0.0:
        world.state = cfg.accident_state
        world.tta = 0.0
        world.accident = True
        world.done = True
    else:
        world.tta = tta
        world.state = tta_to_state(tta, cfg)
        if world.x >= world.section_length:
            world.done = True

    if histogram is not None:
        histogram[world.state] += 1
    if not world.record:
        return None
    if world.nearest >= 0:
        lead = KinematicState(
            position=float(world.leader_pos0[world.nearest] + world.leader_v[world.nearest] * t),
            speed=float(world.leader_v[world.nearest]),
        )
    else:
        lead = KinematicState(position=world.x + 10 * world.section_length, speed=0.0)
    return FrameRecord(
        frame_index=world.frame,
        time=t,
        leader=lead,
        follower=KinematicState(position=world.x, speed=world.v,
                                length=ctl.vehicle_length),
        tta=world.tta,
        state=world.state,
        action=world.action,
        delayed=world.delayed,
        errored=world.errored,
    )


def _run_trip(task, cfg, controller, env, trip_index, histogram, record):
    rng_lead = np.random.default_rng([task.seed, trip_index, 0])
    rng_ctrl = np.random.default_rng([task.seed, trip_index, 1])
    pos0, v = generate_leader_stream(
        task.flow_q, rng_lead, env,
        horizon_m=task.section_length + _LEADER_HORIZON_M,
    )
    world = TripWorld(task, cfg, controller, env, rng_ctrl, pos0, v, record=record)
    frames = []
    max_frames = int(_MAX_TRIP_S / cfg.delta)
    while not world.done:
        if world.frame >= max_frames:
            raise RiskModelError(f"trip {trip_index} exceeded {max_frames} frames")
        rec = step(world, histogram)
        if record:
            frames.append(rec)
    return frames, world.accident


def run_task(
    task: TaskSpec,
    cfg: StateSpaceConfig,
    controller: ControllerSettings | None = None,
    env: TrafficEnv | None = None,
    record_frames: bool = True,
    trip_range: tuple[int, int] | None = None,
) -> SimulationResult:
    """Simulate ``task.trip_count`` independent trips and aggregate the results.

    Each trip derives its own random streams from ``(task.seed, trip index)``,
    so any subrange of trips (``trip_range``, half-open) can be simulated on
    any worker and merged by summing histograms and accident counts without
    changing the outcome.
    """
    controller = controller or ControllerSettings()
    if env is None:
        env = TrafficEnv(flow_q=task.flow_q, u_max=task.u_max)
    lo, hi = trip_range if trip_range is not None else (0, task.trip_count)
    histogram = np.zeros(cfg.n_states, dtype=np.int64)
    frames: list[FrameRecord] = []
    accidents = 0
    for trip in range(lo, hi):
        trip_frames, crashed = _run_trip(task, cfg, controller, env, trip, histogram, record_frames)
        frames.extend(trip_frames)
        accidents += int(crashed)
    trips = hi - lo
    return SimulationResult(
        frames=tuple(frames),
        histogram=StateHistogram(tuple(int(c) for c in histogram)),
        accidents=accidents,
        trips_completed=trips - accidents,
        empirical_h0=accidents / trips,
    )


def merge_results(parts: list[SimulationResult]) -> SimulationResult:
    """Combine per-worker results of disjoint trip ranges (order of parts = trip order)."""
    if not parts:
        raise DomainError("nothing to merge")
    counts = [sum(p.histogram.counts[i] for p in parts)
              for i in range(len(parts[0].histogram.counts))]
    accidents = sum(p.accidents for p in parts)
    completed = sum(p.trips_completed for p in parts)
    trips = accidents + completed
    frames = tuple(f for p in parts for f in p.frames)
    return SimulationResult(
        frames=frames,
        histogram=StateHistogram(tuple(counts)),
        accidents=accidents,
        trips_completed=completed,
        empirical_h0=accidents / trips,
    )


@dataclass(frozen=True)
class EmpiricalChain:
    """Row-normalized transition counts between per-epoch states."""

    counts: np.ndarray
    probs: np.ndarray          # NaN rows mark states that were never visited
    visited: np.ndarray

    def __post_init__(self):
        self.counts.setflags(write=False)
        self.probs.setflags(write=False)
        self.visited.setflags(write=False)


def empirical_chain(frames, cfg: StateSpaceConfig) -> EmpiricalChain:
    """Maximum-likelihood transition estimate from a frame log.

    Frames are subsampled every ``sigma / delta`` frames so one chain step
    matches the state granularity; trips are split wherever the frame index
    does not advance by one.  Rows of never-visited states are NaN rather
    than fabricated.
    """
    frames = list(frames)
    if len(frames) < 2:
        raise EmptyTraceError("need at least two frames")
    stride = max(round(cfg.sigma / cfg.delta), 1)
    n = cfg.n_states
    counts = np.zeros((n, n), dtype=np.int64)
    # split into contiguous trips
    segments: list[list[int]] = [[]]
    prev_idx = None
    for f in frames:
        if prev_idx is not None and f.frame_index != prev_idx + 1:
            segments.append([])
        segments[-1].append(f.state)
        prev_idx = f.frame_index
    got_pair = False
    for seg in segments:
        states = seg[::stride]
        for a, b in zip(states, states[1:]):
            counts[a, b] += 1
            got_pair = True
    if not got_pair:
        raise EmptyTraceError("no epoch-spaced state pairs in the trace")
    visited = counts.sum(axis=1) > 0
    probs = np.full((n, n), math.nan)
    probs[visited] = counts[visited] / counts[visited].sum(axis=1, keepdims=True)
    return EmpiricalChain(counts=counts, probs=probs, visited=visited)
