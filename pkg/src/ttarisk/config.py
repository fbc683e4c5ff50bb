"""Flat key-value run configuration.

Format: UTF-8 text, one ``key = value`` pair per line, ``#`` comments, keys
with dotted section prefixes.  Unknown keys are hard errors so typos cannot
silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .markov_model import ChainParams, TrafficEnv
from .sim_carfollow import ControllerSettings, TaskSpec
from .state_space import StateSpaceConfig, threshold_to_state

_SCALAR_KEYS = {
    "seed": int,
    "output_dir": str,
    "state_space.thrd_detect": float,
    "state_space.thrd_conflict": float,
    "state_space.thrd_deadline": float,
    "state_space.sigma": float,
    "state_space.delta": float,
    "chain.alpha": float,
    "chain.beta": float,
    "chain.ttc_threshold_c": float,
    "traffic.flow_q": float,
    "traffic.u_max": float,
    "traffic.u_free": float,
    "traffic.k_jam": float,
    "traffic.speed_noise_sd": float,
    "controller.accel": float,
    "controller.brake": float,
    "controller.emergency_brake": float,
    "controller.vehicle_length": float,
    "controller.per_frame_randomness": int,
    "sim.trip_count": int,
    "sim.section_length": float,
    "sim.record_frames": int,
}

_TASK_KEYS = {"flow_q": float, "ttc_threshold_c": float, "seed": int}

_DEFAULTS = {
    "state_space.thrd_detect": 2.2,
    "state_space.thrd_conflict": 1.4,
    "state_space.thrd_deadline": 0.6,
    "state_space.sigma": 0.2,
    "state_space.delta": 1.0 / 15.0,
    "chain.alpha": 0.02,
    "chain.beta": 0.34,
    "chain.ttc_threshold_c": 2.0,
    "traffic.flow_q": 1500.0,
    "traffic.u_max": 60.0,
    "traffic.u_free": 60.0,
    "traffic.k_jam": 120.0,
    "traffic.speed_noise_sd": 5.0,
    "controller.accel": 1.5,
    "controller.brake": -3.0,
    "controller.emergency_brake": -6.0,
    "controller.vehicle_length": 5.0,
    "controller.per_frame_randomness": 0,
    "sim.trip_count": 200,
    "sim.section_length": 807.0,
    "sim.record_frames": 1,
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration."""

    state_space: StateSpaceConfig
    alpha: float
    beta: float
    ttc_threshold_c: float
    traffic: TrafficEnv
    controller: ControllerSettings
    tasks: dict[int, TaskSpec]
    trip_count: int
    section_length: float
    seed: int
    record_frames: bool
    output_dir: str | None = None

    @property
    def chain_params(self) -> ChainParams:
        return ChainParams(
            alpha=self.alpha,
            beta=self.beta,
            c=threshold_to_state(self.ttc_threshold_c, self.state_space),
            d_count=self.state_space.d_count,
        )


def _parse_lines(text: str, source: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _convert(key: str, value: str, type_):
    try:
        return type_(value)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {value!r} as {type_.__name__}") from exc


def loads_config(text: str, source: str = "<config>", seed_override: int | None = None) -> RunConfig:
    raw = _parse_lines(text, source)
    values = dict(_DEFAULTS)
    task_fields: dict[int, dict[str, object]] = {}
    for key, value in raw.items():
        if key in _SCALAR_KEYS:
            values[key] = _convert(key, value, _SCALAR_KEYS[key])
            continue
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "task":
            try:
                task_id = int(parts[1])
            except ValueError:
                raise ConfigError(f"unknown key {key!r}") from None
            if parts[2] not in _TASK_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            task_fields.setdefault(task_id, {})[parts[2]] = _convert(key, value, _TASK_KEYS[parts[2]])
            continue
        raise ConfigError(f"unknown key {key!r}")

    if seed_override is not None:
        values["seed"] = seed_override
    if "seed" not in values:
        raise ConfigError("config must set 'seed' (no implicit entropy source)")

    cfg = StateSpaceConfig.from_thresholds(
        thrd_detect=values["state_space.thrd_detect"],
        thrd_conflict=values["state_space.thrd_conflict"],
        thrd_deadline=values["state_space.thrd_deadline"],
        sigma=values["state_space.sigma"],
        delta=values["state_space.delta"],
    )
    traffic = TrafficEnv(
        flow_q=values["traffic.flow_q"],
        u_max=values["traffic.u_max"],
        u_free=values["traffic.u_free"],
        k_jam=values["traffic.k_jam"],
        speed_noise_sd=values["traffic.speed_noise_sd"],
    )
    controller = ControllerSettings(
        accel=values["controller.accel"],
        brake=values["controller.brake"],
        emergency_brake=values["controller.emergency_brake"],
        vehicle_length=values["controller.vehicle_length"],
        alpha=values["chain.alpha"],
        beta=values["chain.beta"],
        per_frame_randomness=bool(values["controller.per_frame_randomness"]),
    )
    seed = values["seed"]
    tasks: dict[int, TaskSpec] = {}
    for task_id in sorted(task_fields):
        fields = task_fields[task_id]
        missing = {"flow_q", "ttc_threshold_c"} - set(fields)
        if missing:
            raise ConfigError(f"task {task_id} is missing keys {sorted(missing)}")
        tasks[task_id] = TaskSpec(
            flow_q=fields["flow_q"],
            ttc_threshold_c=fields["ttc_threshold_c"],
            seed=fields.get("seed", seed + task_id),
            trip_count=values["sim.trip_count"],
            section_length=values["sim.section_length"],
            u_max=values["traffic.u_max"],
        )
    return RunConfig(
        state_space=cfg,
        alpha=values["chain.alpha"],
        beta=values["chain.beta"],
        ttc_threshold_c=values["chain.ttc_threshold_c"],
        traffic=traffic,
        controller=controller,
        tasks=tasks,
        trip_count=values["sim.trip_count"],
        section_length=values["sim.section_length"],
        seed=seed,
        record_frames=bool(values["sim.record_frames"]),
        output_dir=values.get("output_dir"),
    )


def load_config(path, seed_override: int | None = None) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    return loads_config(text, source=str(path), seed_override=seed_override)


DEFAULT_CONFIG_TEXT = """\
# Four-task car-following experiment with the default model parameters.
seed = 20260826

state_space.thrd_detect = 2.2
state_space.thrd_conflict = 1.4
state_space.thrd_deadline = 0.6
state_space.sigma = 0.2
state_space.delta = 0.06666666666666667

chain.alpha = 0.02
chain.beta = 0.34
chain.ttc_threshold_c = 2.0

traffic.flow_q = 1500
traffic.u_max = 60
traffic.u_free = 60
traffic.k_jam = 120
traffic.speed_noise_sd = 5

controller.accel = 1.5
controller.brake = -3.0
controller.emergency_brake = -6.0
controller.vehicle_length = 5.0

sim.trip_count = 200
sim.section_length = 807

task.1.flow_q = 1500
task.1.ttc_threshold_c = 2.0
task.2.flow_q = 1800
task.2.ttc_threshold_c = 2.0
task.3.flow_q = 1500
task.3.ttc_threshold_c = 1.4
task.4.flow_q = 1800
task.4.ttc_threshold_c = 1.4
"""
