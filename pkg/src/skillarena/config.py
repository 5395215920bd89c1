"""Flat key=value run configuration.

One text file configures a whole run. Keys are namespaced by section
prefix (arena., rewards., dqn., plan.); values are scalars, and unknown
keys are rejected so typos cannot silently fall back to defaults. The
canonical rendering (sorted key=value lines) is what gets hashed into
manifests and checkpoints.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

from .arena import ArenaConfig
from .errors import MissingArtifactError, UsageError
from .rewards import RewardWeights

_BOOLS = {
    "true": True, "yes": True, "on": True, "1": True,
    "false": False, "no": False, "off": False, "0": False,
}

ARENA_FIELDS = {
    "arena_radius": "float",
    "tick_seconds": "float",
    "phase": "int",
    "spawn_mode": "str",
    "seed": "int",
}

REWARD_FIELDS = {
    "cam_eps": "float",
    "cam_align_bonus": "bool",
    "move_scale": "float",
    "move_circle_bonus": "bool",
    "move_circle_dist": "float",
    "dodge_alive": "float",
    "dodge_damage": "float",
    "dodge_death": "float",
    "stamina_eps": "float",
    "ha_damage_taken": "float",
    "ha_damage_dealt": "float",
    "ha_death": "float",
    "ha_win": "float",
    "ha_stamina_penalty": "bool",
}

DQN_FIELDS = {
    "learning_rate": "float",
    "batch_size": "int",
    "gamma": "float",
    "train_freq": "int",
    "target_update": "int",
    "warmup": "int",
    "eps_start": "float",
    "eps_final": "float",
    "eps_fraction": "float",
    "buffer_capacity": "int",
    "hidden": "ints",
    "eval_every": "int",
    "eval_episodes": "int",
}

_STAGE_KEYS = ("cam", "lock", "move", "dodge", "ha")
PLAN_FIELDS = {f"{s}_budget": "int" for s in _STAGE_KEYS}
PLAN_FIELDS.update({f"{s}_horizon": "int" for s in _STAGE_KEYS})
PLAN_FIELDS.update({f"{s}_spawn": "str" for s in _STAGE_KEYS})
PLAN_FIELDS.update(
    {
        "finetune_budget": "int",
        "finetune_spawn": "str",
        "e2e_budget": "int",
        "e2e_horizon": "int",
    }
)

SECTIONS = {
    "arena": ARENA_FIELDS,
    "rewards": REWARD_FIELDS,
    "dqn": DQN_FIELDS,
    "plan": PLAN_FIELDS,
}


def parse_config_text(text: str) -> dict[str, str]:
    """Key=value lines; blank lines and # comments are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno} is not key=value: {line!r}")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if key in out:
            raise UsageError(f"duplicate config key {key!r} at line {lineno}")
        out[key] = value
    validate_keys(out)
    return out


def load_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def validate_keys(mapping: dict[str, str]) -> None:
    for key in mapping:
        if "." not in key:
            raise UsageError(f"config key {key!r} is missing its section prefix")
        prefix, name = key.split(".", 1)
        fields = SECTIONS.get(prefix)
        if fields is None:
            raise UsageError(f"unknown config section {prefix!r} in key {key!r}")
        if name not in fields:
            raise UsageError(f"unknown config key {key!r}")


def render_config(mapping: dict[str, str]) -> str:
    return "".join(f"{k} = {mapping[k]}\n" for k in sorted(mapping))


def config_hash(mapping: dict[str, str]) -> str:
    canon = "".join(f"{k}={mapping[k]}\n" for k in sorted(mapping))
    return hashlib.sha256(canon.encode()).hexdigest()


def _coerce(key: str, value: str, kind: str):
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            flag = _BOOLS.get(value.lower())
            if flag is None:
                raise ValueError(value)
            return flag
        if kind == "ints":
            return tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"config key {key!r} has malformed value {value!r}") from None
    return value


def section(mapping: dict[str, str], prefix: str) -> dict[str, object]:
    """Typed values of one section, keyed by bare field name."""
    fields = SECTIONS[prefix]
    out: dict[str, object] = {}
    for key, value in mapping.items():
        if key.startswith(prefix + "."):
            name = key.split(".", 1)[1]
            out[name] = _coerce(key, value, fields[name])
    return out


def arena_config(mapping: dict[str, str], **overrides) -> ArenaConfig:
    kwargs = section(mapping, "arena")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ArenaConfig(**kwargs)


def reward_weights(mapping: dict[str, str]) -> RewardWeights:
    return RewardWeights(**section(mapping, "rewards"))


def dqn_kwargs(mapping: dict[str, str]) -> dict[str, object]:
    """Learner overrides; the per-stage budget is supplied by the plan."""
    return section(mapping, "dqn")
