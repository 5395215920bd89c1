"""Canonical 25-feature world snapshot and its per-skill projections.

Feature order (indices 0..24):
enemy anim id, enemy anim progress, player anim id, player anim progress,
stamina ratio, player hp ratio, enemy hp ratio, enemy facing, player facing,
estus count, distance, unit direction to enemy (3), camera direction (3),
player position (3), enemy position (3), camera-target angle, lock flag.
"""
from __future__ import annotations

import math

import numpy as np

from .actions import SkillId
from .errors import UsageError

STATE_DIM = 25

F_ENEMY_ANIM = 0
F_ENEMY_ANIM_PROGRESS = 1
F_PLAYER_ANIM = 2
F_PLAYER_ANIM_PROGRESS = 3
F_STAMINA = 4
F_PLAYER_HP = 5
F_ENEMY_HP = 6
F_ENEMY_FACING = 7
F_PLAYER_FACING = 8
F_ESTUS = 9
F_DIST = 10
F_ENEMY_DIR = slice(11, 14)
F_CAMERA = slice(14, 17)
F_PLAYER_POS = slice(17, 20)
F_ENEMY_POS = slice(20, 23)
F_CAM_ANGLE = 23
F_LOCKED = 24

FEATURE_NAMES = (
    "enemy_anim",
    "enemy_anim_progress",
    "player_anim",
    "player_anim_progress",
    "stamina_ratio",
    "player_hp_ratio",
    "enemy_hp_ratio",
    "enemy_facing",
    "player_facing",
    "estus",
    "dist",
    "enemy_dir_x",
    "enemy_dir_y",
    "enemy_dir_z",
    "camera_x",
    "camera_y",
    "camera_z",
    "player_x",
    "player_y",
    "player_z",
    "enemy_x",
    "enemy_y",
    "enemy_z",
    "cam_angle",
    "locked",
)

PROJECTION_INDICES: dict[SkillId, np.ndarray] = {
    SkillId.CAM: np.array([11, 12, 13, 14, 15, 16, 23]),
    SkillId.LOCK: np.array([23, 24]),
    SkillId.MOVE: np.array([17, 18, 19, 20, 21, 22]),
    SkillId.DODGE: np.array([0, 1, 7, 8, 4, 5, 10]),
    SkillId.HA: np.array([0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]),
    SkillId.E2E: np.arange(STATE_DIM),
}

OBS_DIMS = {skill: len(idx) for skill, idx in PROJECTION_INDICES.items()}


def camera_target_angle(camera_dir: np.ndarray, enemy_dir: np.ndarray) -> float:
    """Angle in [0, pi] between the camera ray and the unit enemy direction.

    A zero enemy direction (coincident entities) maps to pi/2 so downstream
    networks never see NaN.
    """
    if not enemy_dir.any():
        return math.pi / 2
    cos = float(np.dot(camera_dir, enemy_dir)) / float(np.linalg.norm(camera_dir))
    return math.acos(min(1.0, max(-1.0, cos)))


def derive_features(world) -> np.ndarray:
    """Project a simulator world into the canonical 25-feature vector."""
    player = world.player
    boss = world.boss
    out = np.empty(STATE_DIM)

    px, py = player.x, player.y
    ex, ey = boss.x, boss.y
    dx, dy = ex - px, ey - py
    dist = math.hypot(dx, dy)
    # the cutoff also catches subnormal offsets, where dx/dist is garbage
    if dist > 1e-12:
        enemy_dir = np.array([dx / dist, dy / dist, 0.0])
    else:
        enemy_dir = np.zeros(3)
    camera = world.camera_dir

    out[F_ENEMY_ANIM] = boss.anim_id
    out[F_ENEMY_ANIM_PROGRESS] = boss.anim_progress
    out[F_PLAYER_ANIM] = player.anim_id
    out[F_PLAYER_ANIM_PROGRESS] = player.anim_progress
    out[F_STAMINA] = player.stamina_ratio
    out[F_PLAYER_HP] = player.hp_ratio
    out[F_ENEMY_HP] = world.boss_hp_ratio
    out[F_ENEMY_FACING] = boss.orientation
    out[F_PLAYER_FACING] = player.orientation
    out[F_ESTUS] = world.estus_remaining
    out[F_DIST] = dist
    out[F_ENEMY_DIR] = enemy_dir
    out[F_CAMERA] = camera
    out[F_PLAYER_POS] = (px, py, 0.0)
    out[F_ENEMY_POS] = (ex, ey, 0.0)
    out[F_CAM_ANGLE] = camera_target_angle(camera, enemy_dir)
    out[F_LOCKED] = world.lock_on
    return out


def project(state: np.ndarray, skill: SkillId) -> np.ndarray:
    """Select the skill's observation slice of the canonical state."""
    if state.shape != (STATE_DIM,):
        raise UsageError(f"expected a {STATE_DIM}-feature state, got shape {state.shape}")
    try:
        idx = PROJECTION_INDICES[skill]
    except KeyError:
        raise UsageError(f"unknown skill id {skill!r}") from None
    return state[idx]
