"""Per-skill shaped rewards.

All functions are pure. State-based rewards read the raw (unnormalized)
feature vector; delta-based rewards read one-tick changes. Rewards are
accrued per tick and summed over a skill's decision span by the cadence
loop, and are never normalized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import F_CAM_ANGLE, F_DIST, F_LOCKED


@dataclass(frozen=True)
class RewardWeights:
    cam_eps: float = 0.6            # alignment threshold, also gates lock-on
    cam_align_bonus: bool = True
    move_scale: float = 0.1
    move_circle_bonus: bool = False  # off by default, agents circle anyway
    move_circle_dist: float = 3.0
    dodge_alive: float = 0.02
    dodge_damage: float = 5.0
    dodge_death: float = 5.0
    stamina_eps: float = 0.05
    ha_damage_taken: float = 5.0
    ha_damage_dealt: float = 15.0
    ha_death: float = 5.0
    ha_win: float = 5.0
    ha_stamina_penalty: bool = False  # combat stamina penalty, off by default


DEFAULT_WEIGHTS = RewardWeights()


@dataclass(frozen=True)
class TickDelta:
    """Normalized one-tick changes plus terminal flags.

    player_hp and boss_hp are hp-ratio deltas (boss against its current
    phase pool, so boss_hp is never positive). stamina is the stamina-ratio
    delta and estus the flask-count delta, both non-positive in play.
    """

    player_hp: float = 0.0
    boss_hp: float = 0.0
    stamina: float = 0.0
    estus: int = 0
    agent_dead: bool = False
    enemy_dead: bool = False


def reward_cam(state: np.ndarray, weights: RewardWeights = DEFAULT_WEIGHTS) -> float:
    """Negative camera-target angle, plus a bonus inside the aligned cone."""
    alpha = float(state[F_CAM_ANGLE])
    bonus = 1.0 if weights.cam_align_bonus and alpha < weights.cam_eps else 0.0
    return -alpha + bonus


def reward_lock(state: np.ndarray, weights: RewardWeights = DEFAULT_WEIGHTS) -> float:
    """+1 while locked on, -1 otherwise."""
    return 1.0 if state[F_LOCKED] >= 0.5 else -1.0


def reward_move(
    state: np.ndarray,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    sideways: bool = False,
) -> float:
    """Distance penalty, optionally with a close-range strafing bonus."""
    r = -weights.move_scale * float(state[F_DIST])
    if weights.move_circle_bonus and sideways and state[F_DIST] < weights.move_circle_dist:
        r += 1.0
    return r


def reward_dodge(
    delta: TickDelta,
    stamina_ratio: float,
    weights: RewardWeights = DEFAULT_WEIGHTS,
) -> float:
    """Survival bonus, damage and death penalties, low-stamina penalty."""
    r = weights.dodge_alive
    r += weights.dodge_damage * delta.player_hp
    if delta.agent_dead:
        r -= weights.dodge_death
    if stamina_ratio < weights.stamina_eps:
        r -= 1.0
    return r


def reward_ha(
    delta: TickDelta,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    stamina_ratio: float | None = None,
) -> float:
    """Damage traded, death penalty, win bonus; healing pays through player_hp."""
    r = weights.ha_damage_taken * delta.player_hp
    r -= weights.ha_damage_dealt * delta.boss_hp
    if delta.agent_dead:
        r -= weights.ha_death
    if delta.enemy_dead:
        r += weights.ha_win
    if (
        weights.ha_stamina_penalty
        and stamina_ratio is not None
        and stamina_ratio < weights.stamina_eps
    ):
        r -= 1.0
    return r


def reward_e2e(
    delta: TickDelta,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    stamina_ratio: float | None = None,
) -> float:
    """The monolithic agent optimizes the combat objective unchanged."""
    return reward_ha(delta, weights, stamina_ratio)
