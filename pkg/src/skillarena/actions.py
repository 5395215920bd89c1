"""Discrete control vocabularies, hold timings, and composite-action merging.

Every skill owns one control subspace (camera, lock, movement, dodge,
combat).  A composite action carries exactly one sub-action per subspace;
the merged 16-action set used by the monolithic agent decodes into the same
five slots.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .errors import UsageError


class SkillId(str, Enum):
    CAM = "cam"
    LOCK = "lock"
    MOVE = "move"
    DODGE = "dodge"
    HA = "ha"
    E2E = "e2e"


# Fixed iteration order for deterministic cadence loops.
SKILL_ORDER = (SkillId.CAM, SkillId.LOCK, SkillId.MOVE, SkillId.DODGE, SkillId.HA)

ACTION_LABELS: dict[SkillId, tuple[str, ...]] = {
    SkillId.CAM: ("cam_up", "cam_down", "cam_left", "cam_right", "idle"),
    SkillId.LOCK: ("toggle_lock", "idle"),
    SkillId.MOVE: (
        "forward",
        "back",
        "left",
        "right",
        "forward_left",
        "forward_right",
        "back_left",
        "back_right",
        "idle",
    ),
    SkillId.DODGE: ("dodge", "idle"),
    SkillId.HA: ("light_attack", "heal", "idle"),
    SkillId.E2E: (
        "forward",
        "back",
        "left",
        "right",
        "forward_dodge",
        "back_dodge",
        "left_dodge",
        "right_dodge",
        "cam_up",
        "cam_down",
        "cam_left",
        "cam_right",
        "toggle_lock",
        "light_attack",
        "heal",
        "idle",
    ),
}

ACTION_SET_SIZES = {skill: len(labels) for skill, labels in ACTION_LABELS.items()}

# Idle is always the last label of a set.
IDLE_INDEX = {skill: len(labels) - 1 for skill, labels in ACTION_LABELS.items()}

CAM_IDLE = IDLE_INDEX[SkillId.CAM]
LOCK_IDLE = IDLE_INDEX[SkillId.LOCK]
MOVE_IDLE = IDLE_INDEX[SkillId.MOVE]
DODGE_IDLE = IDLE_INDEX[SkillId.DODGE]
HA_IDLE = IDLE_INDEX[SkillId.HA]

LOCK_TOGGLE = ACTION_LABELS[SkillId.LOCK].index("toggle_lock")
DODGE_ROLL = ACTION_LABELS[SkillId.DODGE].index("dodge")
HA_ATTACK = ACTION_LABELS[SkillId.HA].index("light_attack")
HA_HEAL = ACTION_LABELS[SkillId.HA].index("heal")

# Animation/hold lengths in ticks (0.1 s each): dodge 0.5 s, light attack
# 0.2 s, drinking 0.3 s, fumbling for an empty flask 0.5 s, all else 0.1 s.
DODGE_HOLD_TICKS = 5
ATTACK_HOLD_TICKS = 2
HEAL_HOLD_TICKS = 3
EMPTY_HEAL_HOLD_TICKS = 5

# Unit movement directions in the camera-relative plane (forward, strafe).
_DIAG = 0.7071067811865476
MOVE_DIRECTIONS: dict[str, tuple[float, float]] = {
    "forward": (1.0, 0.0),
    "back": (-1.0, 0.0),
    "left": (0.0, 1.0),
    "right": (0.0, -1.0),
    "forward_left": (_DIAG, _DIAG),
    "forward_right": (_DIAG, -_DIAG),
    "back_left": (-_DIAG, _DIAG),
    "back_right": (-_DIAG, -_DIAG),
    "idle": (0.0, 0.0),
}

SIDEWAYS_MOVE_LABELS = frozenset({"left", "right"})


@dataclass(frozen=True)
class CompositeAction:
    """One sub-action per control subspace; idle slots are valid fillers."""

    camera: int = CAM_IDLE
    lock: int = LOCK_IDLE
    move: int = MOVE_IDLE
    dodge: int = DODGE_IDLE
    combat: int = HA_IDLE

    def labels(self) -> tuple[str, str, str, str, str]:
        return (
            ACTION_LABELS[SkillId.CAM][self.camera],
            ACTION_LABELS[SkillId.LOCK][self.lock],
            ACTION_LABELS[SkillId.MOVE][self.move],
            ACTION_LABELS[SkillId.DODGE][self.dodge],
            ACTION_LABELS[SkillId.HA][self.combat],
        )


IDLE_COMPOSITE = CompositeAction()


@dataclass(frozen=True)
class SubAction:
    """A skill's most recent choice plus the remaining hold on it."""

    skill: SkillId
    action: int
    hold_ticks: int


def action_label(skill: SkillId, action: int) -> str:
    labels = ACTION_LABELS[skill]
    if not 0 <= action < len(labels):
        raise UsageError(f"action index {action} out of range for skill {skill.value}")
    return labels[action]


def hold_duration(skill: SkillId, action: int, estus_remaining: int = 1) -> int:
    """Ticks a freshly selected action occupies before the skill re-decides."""
    label = action_label(skill, action)
    if label == "dodge" or label.endswith("_dodge"):
        return DODGE_HOLD_TICKS
    if label == "light_attack":
        return ATTACK_HOLD_TICKS
    if label == "heal":
        return HEAL_HOLD_TICKS if estus_remaining > 0 else EMPTY_HEAL_HOLD_TICKS
    return 1


def compose(latest: Mapping[SkillId, int]) -> CompositeAction:
    """Merge the most recent per-skill actions into one control signal.

    Skills absent from the mapping contribute idle.  An E2E entry decodes
    into all five slots and must be the only entry.
    """
    if SkillId.E2E in latest:
        if len(latest) != 1:
            raise UsageError("an e2e action cannot be merged with per-skill actions")
        return decode_e2e(latest[SkillId.E2E])
    return CompositeAction(
        camera=latest.get(SkillId.CAM, CAM_IDLE),
        lock=latest.get(SkillId.LOCK, LOCK_IDLE),
        move=latest.get(SkillId.MOVE, MOVE_IDLE),
        dodge=latest.get(SkillId.DODGE, DODGE_IDLE),
        combat=latest.get(SkillId.HA, HA_IDLE),
    )


def decode_e2e(action: int) -> CompositeAction:
    """Expand one merged-set action into the five composite slots."""
    label = action_label(SkillId.E2E, action)
    if label == "idle":
        return IDLE_COMPOSITE
    if label.endswith("_dodge"):
        move_label = label[: -len("_dodge")]
        return CompositeAction(
            move=ACTION_LABELS[SkillId.MOVE].index(move_label), dodge=DODGE_ROLL
        )
    if label in ACTION_LABELS[SkillId.MOVE]:
        return CompositeAction(move=ACTION_LABELS[SkillId.MOVE].index(label))
    if label in ACTION_LABELS[SkillId.CAM]:
        return CompositeAction(camera=ACTION_LABELS[SkillId.CAM].index(label))
    if label == "toggle_lock":
        return CompositeAction(lock=LOCK_TOGGLE)
    return CompositeAction(combat=ACTION_LABELS[SkillId.HA].index(label))


def encode_e2e(composite: CompositeAction) -> int:
    """Inverse of decode_e2e for composites reachable from the merged set."""
    cam_l, lock_l, move_l, dodge_l, combat_l = composite.labels()
    active = [
        lab
        for lab, idle in (
            (cam_l, "idle"),
            (lock_l, "idle"),
            (move_l, "idle"),
            (dodge_l, "idle"),
            (combat_l, "idle"),
        )
        if lab != idle
    ]
    e2e_labels = ACTION_LABELS[SkillId.E2E]
    if not active:
        return e2e_labels.index("idle")
    if dodge_l == "dodge":
        if f"{move_l}_dodge" not in e2e_labels or len(active) != 2:
            raise UsageError("merged set only encodes dodge together with a cardinal move")
        return e2e_labels.index(f"{move_l}_dodge")
    if len(active) != 1:
        raise UsageError(f"composite {composite} is not encodable in the merged set")
    return e2e_labels.index(active[0])
