"""Deterministic tick simulator of a staged boss duel on a planar disc.

One step is one 0.1 s tick. The boss runs a telegraphed windup, active,
recovery state machine; the player has stamina-gated dodges with an
invulnerability window, a two-tick light attack, and a limited healing
flask. All randomness (spawns, attack selection, damage rolls) comes from
a single per-episode generator, so trajectories replay bit-identically.

An episode covers exactly one boss phase. Phase 1 runs the health pool
from 1037 down to the 622 transition threshold; phase 2 starts at 622 and
ends below 60, with harder-hitting attacks, lower close-range aggression,
a long-range lunge, and a second flask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .actions import (
    DODGE_HOLD_TICKS,
    ATTACK_HOLD_TICKS,
    HEAL_HOLD_TICKS,
    MOVE_DIRECTIONS,
    SIDEWAYS_MOVE_LABELS,
    CompositeAction,
)
from .errors import UsageError
from .rewards import TickDelta

TICK_SECONDS = 0.1

BOSS_HP_MAX = 1037.0
PHASE_START_HP = {1: 1037.0, 2: 622.0}
PHASE_DEFEAT_HP = {1: 622.0, 2: 60.0}
PHASE_ESTUS = {1: 1, 2: 2}

PLAYER_HP_MAX = 100.0
PLAYER_DEATH_RATIO = 0.05
STAMINA_MAX = 100.0
DODGE_STAMINA_COST = 25.0
ATTACK_STAMINA_COST = 20.0
STAMINA_REGEN = 8.0  # per tick, suspended while attacking or dodging
HEAL_FRACTION = 0.6

PLAYER_WALK_SPEED = 0.5  # length units per tick
PLAYER_ROLL_SPEED = 0.3
PLAYER_ATTACK_REACH = 2.5
PLAYER_ATTACK_CONE = 0.7  # half-angle, radians
PLAYER_ATTACK_DAMAGE = (30.0, 50.0)

CAMERA_STEP = 0.1  # radians per camera action
CAMERA_PITCH_LIMIT = 1.2
LOCK_MAX_ANGLE = 0.6  # lock-on gate reuses the camera alignment threshold
LOCK_MAX_DIST = 12.0
LOCK_DROP_DIST = 14.0

BODY_BLOCK_DIST = 0.8
AGGRO_RADIUS = 12.0
BOSS_WALK_SPEED = 0.3
BOSS_TURN_IDLE = 0.3  # radians per tick while not attacking
BOSS_TURN_WINDUP = 0.1  # committed attacks track the player only slowly
BOSS_PREFERRED_RANGE = 2.0

PHASE2_DAMAGE_MULT = 1.6
PHASE2_CLOSE_WEIGHT_MULT = 0.5
# A swing that connects while the boss is mid-attack (windup or active)
# only chips; landing it during recovery or a gap move deals full damage.
CHIP_DAMAGE_MULT = 0.25
# A boss strike that lands while the player is committed to a swing is a
# counter-hit: it connects clean and cannot be braced against.
COUNTER_HIT_MULT = 3.0

# Player animation ids (kappa for the player entity).
ANIM_IDLE = 0
ANIM_DODGE = 1
ANIM_ATTACK = 2
ANIM_HEAL = 3

# 1-indexed ticks of the dodge animation that grant invulnerability.
DODGE_IFRAME_TICKS = frozenset({2, 3, 4})

ONGOING = "ongoing"
PLAYER_DEAD = "player_dead"
BOSS_DEFEATED = "boss_defeated"
TRUNCATED = "truncated"

SPAWN_MODES = ("mid", "long", "random")


@dataclass(frozen=True)
class BossMove:
    """One boss behavior: an attack, or a non-damaging gap move."""

    name: str
    anim_id: int
    windup: int
    active: int = 0
    recovery: int = 0
    reach: float = 0.0
    cone: float = 0.0  # half-angle about the boss orientation
    damage: tuple[float, float] = (0.0, 0.0)
    weight: float = 0.0
    max_range: float = math.inf  # eligible only when distance <= max_range
    min_range: float = 0.0
    advance: float = 0.0  # forward motion per windup/active tick
    pursue: bool = False  # walk toward the player for the whole duration

    @property
    def duration(self) -> int:
        return self.windup + self.active + self.recovery

    @property
    def is_attack(self) -> bool:
        return self.active > 0


IDLE_MOVE = BossMove("idle", 0, windup=1)
APPROACH_MOVE = BossMove("approach", 0, windup=2, pursue=True)
HESITATE_MOVE = BossMove("hesitate", 0, windup=5, weight=3.0)

# Every active window is 2 ticks against a 3-tick i-frame span, so a roll
# begun one or two ticks before impact clears the whole hit volume. Damage
# is tuned so trading hits loses the race: a player who attacks through
# windups dies before the phase hp pool is emptied. max_range never
# exceeds what the attack can land on a stationary target (reach, plus
# advance closed during windup for the lunge); outside every max_range the
# boss approaches instead, so it cannot stall out of reach.
_PHASE1_ATTACKS = (
    BossMove("swipe", 1, windup=3, active=2, recovery=4, reach=3.0, cone=1.2,
             damage=(14.0, 21.0), weight=3.0, max_range=3.0),
    BossMove("combo", 2, windup=4, active=2, recovery=5, reach=3.4, cone=1.0,
             damage=(19.0, 26.0), weight=2.0, max_range=3.4),
    BossMove("overhead", 3, windup=6, active=2, recovery=5, reach=4.5, cone=0.7,
             damage=(23.0, 32.0), weight=1.5, max_range=4.5),
)

_LUNGE = BossMove("lunge", 4, windup=5, active=2, recovery=5, reach=3.2, cone=0.8,
                  damage=(24.0, 35.0), weight=2.5, max_range=6.5, min_range=5.0,
                  advance=0.55)


def build_roster(phase: int) -> tuple[BossMove, ...]:
    """Attack table for a phase; the gap moves are shared and not listed."""
    if phase == 1:
        return _PHASE1_ATTACKS
    scaled = tuple(
        replace(
            a,
            damage=(a.damage[0] * PHASE2_DAMAGE_MULT, a.damage[1] * PHASE2_DAMAGE_MULT),
            weight=a.weight * PHASE2_CLOSE_WEIGHT_MULT,
        )
        for a in _PHASE1_ATTACKS
    )
    return scaled + (_LUNGE,)


ROSTERS = {1: build_roster(1), 2: build_roster(2)}


@dataclass(frozen=True)
class ArenaConfig:
    arena_radius: float = 10.0
    tick_seconds: float = TICK_SECONDS
    phase: int = 1
    spawn_mode: str = "mid"
    seed: int = 0

    def __post_init__(self):
        if self.arena_radius <= 0:
            raise UsageError(f"arena_radius must be positive, got {self.arena_radius}")
        if self.tick_seconds <= 0:
            raise UsageError(f"tick_seconds must be positive, got {self.tick_seconds}")
        if self.phase not in (1, 2):
            raise UsageError(f"phase must be 1 or 2, got {self.phase}")
        if self.spawn_mode not in SPAWN_MODES:
            raise UsageError(f"spawn_mode must be one of {SPAWN_MODES}, got {self.spawn_mode!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise UsageError(f"seed must fit in 64 unsigned bits, got {self.seed}")


@dataclass
class PlayerState:
    x: float
    y: float
    orientation: float
    hp: float = PLAYER_HP_MAX
    hp_max: float = PLAYER_HP_MAX
    stamina: float = STAMINA_MAX
    anim: int = ANIM_IDLE
    anim_total: int = 0
    anim_left: int = 0
    roll_dx: float = 0.0
    roll_dy: float = 0.0
    heal_pending: bool = False

    @property
    def anim_id(self) -> int:
        return self.anim

    @property
    def anim_progress(self) -> float:
        if self.anim_total == 0:
            return 0.0
        return (self.anim_total - self.anim_left) / self.anim_total

    @property
    def anim_tick(self) -> int:
        """1-indexed tick of the current animation."""
        return self.anim_total - self.anim_left + 1

    @property
    def invulnerable(self) -> bool:
        return self.anim == ANIM_DODGE and self.anim_tick in DODGE_IFRAME_TICKS

    @property
    def hp_ratio(self) -> float:
        return self.hp / self.hp_max

    @property
    def stamina_ratio(self) -> float:
        return self.stamina / STAMINA_MAX


@dataclass
class BossState:
    x: float
    y: float
    orientation: float
    hp: float = BOSS_HP_MAX
    hp_max: float = BOSS_HP_MAX
    move: BossMove = IDLE_MOVE
    elapsed: int = 0
    has_hit: bool = False

    @property
    def anim_id(self) -> int:
        return self.move.anim_id

    @property
    def anim_progress(self) -> float:
        return self.elapsed / self.move.duration

    @property
    def hp_ratio(self) -> float:
        return self.hp / self.hp_max


@dataclass
class World:
    config: ArenaConfig
    player: PlayerState
    boss: BossState
    cam_yaw: float
    cam_pitch: float
    rng: np.random.Generator
    lock_on: int = 0
    estus_remaining: int = 1
    tick: int = 0
    episode_outcome: str = ONGOING

    @property
    def phase(self) -> int:
        return self.config.phase

    @property
    def camera_dir(self) -> np.ndarray:
        cp = math.cos(self.cam_pitch)
        return np.array([
            cp * math.cos(self.cam_yaw),
            cp * math.sin(self.cam_yaw),
            math.sin(self.cam_pitch),
        ])

    @property
    def boss_hp_ratio(self) -> float:
        """Boss hp against the current phase pool, clamped into [0, 1]."""
        start = PHASE_START_HP[self.phase]
        floor = PHASE_DEFEAT_HP[self.phase]
        return min(1.0, max(0.0, (self.boss.hp - floor) / (start - floor)))

    @property
    def distance(self) -> float:
        return math.hypot(self.boss.x - self.player.x, self.boss.y - self.player.y)


@dataclass(frozen=True)
class StepEvents:
    """What happened during one tick, for rewards, logs, and diagnostics."""

    delta: TickDelta
    outcome: str
    boss_hit: bool = False
    boss_damage: float = 0.0
    player_hit: bool = False
    healed: bool = False
    dodge_started: bool = False
    attack_started: bool = False
    heal_started: bool = False
    lock_changed: bool = False
    sideways: bool = False
    boss_selected: str = ""  # boss move chosen this tick, if any
    boss_selected_dist: float = math.nan


def check_termination(world: World) -> str:
    """Death and defeat thresholds; truncation belongs to the episode driver."""
    if world.player.hp / world.player.hp_max < PLAYER_DEATH_RATIO:
        return PLAYER_DEAD
    if world.boss.hp < PHASE_DEFEAT_HP[world.phase]:
        return BOSS_DEFEATED
    return ONGOING


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def _turn_toward(current: float, target: float, rate: float) -> float:
    diff = _wrap_angle(target - current)
    if abs(diff) <= rate:
        return target
    return _wrap_angle(current + math.copysign(rate, diff))


class Arena:
    """Validated construction plus reset/step against the shared rules."""

    def __init__(self, config: ArenaConfig | None = None):
        self.config = config if config is not None else ArenaConfig()

    def reset(self, seed: int | None = None) -> World:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        if cfg.spawn_mode == "random":
            r = rng.uniform(1.0, cfg.arena_radius - 0.5)
            theta = rng.uniform(-math.pi, math.pi)
            px, py = r * math.cos(theta), r * math.sin(theta)
            orientation = rng.uniform(-math.pi, math.pi)
            # the camera spawns level and roughly toward the action, as a
            # third-person follow camera would
            yaw = _wrap_angle(math.atan2(-py, -px) + rng.uniform(-1.2, 1.2))
            pitch = 0.0
        else:
            frac = 0.4 if cfg.spawn_mode == "mid" else 0.8
            px, py = frac * cfg.arena_radius, 0.0
            orientation = math.pi  # facing the boss at the arena center
            yaw, pitch = math.pi, 0.0
        player = PlayerState(x=px, y=py, orientation=orientation)
        boss = BossState(x=0.0, y=0.0, orientation=math.atan2(py, px),
                         hp=PHASE_START_HP[cfg.phase])
        return World(config=cfg, player=player, boss=boss, cam_yaw=yaw,
                     cam_pitch=pitch, rng=rng,
                     estus_remaining=PHASE_ESTUS[cfg.phase])

    def step(self, world: World, composite: CompositeAction) -> StepEvents:
        if world.episode_outcome != ONGOING:
            raise UsageError("cannot step a finished episode")
        player, boss = world.player, world.boss
        hp_before = player.hp
        boss_ratio_before = world.boss_hp_ratio
        stamina_before = player.stamina
        estus_before = world.estus_remaining
        cam_l, lock_l, move_l, dodge_l, combat_l = composite.labels()

        lock_changed = self._apply_lock_toggle(world, lock_l)
        self._apply_camera(world, cam_l)
        dodge_started, attack_started, heal_started = self._initiate_player_action(
            world, move_l, dodge_l, combat_l
        )
        self._move_player(world, move_l)
        boss_damage, selected, selected_dist = self._boss_tick(world)
        player_hit, healed = self._resolve_player_action(world)

        if player.anim not in (ANIM_ATTACK, ANIM_DODGE):
            player.stamina = min(STAMINA_MAX, player.stamina + STAMINA_REGEN)
        if player.anim != ANIM_IDLE:
            player.anim_left -= 1
            if player.anim_left <= 0:
                player.anim = ANIM_IDLE
                player.anim_total = 0
                player.anim_left = 0

        self._separate_and_clamp(world)

        if world.lock_on and world.distance > LOCK_DROP_DIST:
            world.lock_on = 0
            lock_changed = True
        if world.lock_on:
            self._aim_camera_at_boss(world)

        world.tick += 1
        outcome = check_termination(world)
        world.episode_outcome = outcome

        delta = TickDelta(
            player_hp=(player.hp - hp_before) / player.hp_max,
            boss_hp=world.boss_hp_ratio - boss_ratio_before,
            stamina=(player.stamina - stamina_before) / STAMINA_MAX,
            estus=world.estus_remaining - estus_before,
            agent_dead=outcome == PLAYER_DEAD,
            enemy_dead=outcome == BOSS_DEFEATED,
        )
        return StepEvents(
            delta=delta,
            outcome=outcome,
            boss_hit=boss_damage > 0.0,
            boss_damage=boss_damage,
            player_hit=player_hit,
            healed=healed,
            dodge_started=dodge_started,
            attack_started=attack_started,
            heal_started=heal_started,
            lock_changed=lock_changed,
            sideways=move_l in SIDEWAYS_MOVE_LABELS,
            boss_selected=selected,
            boss_selected_dist=selected_dist,
        )

    def _lock_target_angle(self, world: World) -> float:
        d = world.distance
        if d == 0.0:
            return math.pi / 2
        dx = world.boss.x - world.player.x
        dy = world.boss.y - world.player.y
        enemy_dir = np.array([dx / d, dy / d, 0.0])
        cos = float(np.dot(world.camera_dir, enemy_dir))
        return math.acos(min(1.0, max(-1.0, cos)))

    def _apply_lock_toggle(self, world: World, lock_l: str) -> bool:
        if lock_l != "toggle_lock":
            return False
        if world.lock_on:
            world.lock_on = 0
            return True
        if (world.distance < LOCK_MAX_DIST
                and self._lock_target_angle(world) < LOCK_MAX_ANGLE):
            world.lock_on = 1
            return True
        return False

    def _apply_camera(self, world: World, cam_l: str) -> None:
        if world.lock_on:
            self._aim_camera_at_boss(world)
            return
        if cam_l == "cam_up":
            world.cam_pitch = min(CAMERA_PITCH_LIMIT, world.cam_pitch + CAMERA_STEP)
        elif cam_l == "cam_down":
            world.cam_pitch = max(-CAMERA_PITCH_LIMIT, world.cam_pitch - CAMERA_STEP)
        elif cam_l == "cam_left":
            world.cam_yaw = _wrap_angle(world.cam_yaw + CAMERA_STEP)
        elif cam_l == "cam_right":
            world.cam_yaw = _wrap_angle(world.cam_yaw - CAMERA_STEP)

    def _aim_camera_at_boss(self, world: World) -> None:
        dx = world.boss.x - world.player.x
        dy = world.boss.y - world.player.y
        if dx == 0.0 and dy == 0.0:
            return
        world.cam_yaw = math.atan2(dy, dx)
        world.cam_pitch = 0.0

    def _walk_direction(self, world: World, move_l: str) -> tuple[float, float]:
        f, s = MOVE_DIRECTIONS[move_l]
        cy, sy = math.cos(world.cam_yaw), math.sin(world.cam_yaw)
        return f * cy + s * sy, f * sy - s * cy

    def _initiate_player_action(
        self, world: World, move_l: str, dodge_l: str, combat_l: str
    ) -> tuple[bool, bool, bool]:
        player = world.player
        if player.anim != ANIM_IDLE:
            return False, False, False
        # On a contested tick the deliberate commitments win the body: swing,
        # then sip, then roll. Offense cannot be roll-canceled, so choosing
        # when to attack stays consequential.
        if combat_l == "light_attack" and player.stamina >= ATTACK_STAMINA_COST:
            player.stamina -= ATTACK_STAMINA_COST
            player.anim = ANIM_ATTACK
            player.anim_total = player.anim_left = ATTACK_HOLD_TICKS
            return False, True, False
        if combat_l == "heal" and world.estus_remaining > 0:
            # estus is drained when the sip completes, not on initiation
            player.anim = ANIM_HEAL
            player.anim_total = player.anim_left = HEAL_HOLD_TICKS
            player.heal_pending = True
            return False, False, True
        if dodge_l == "dodge" and player.stamina >= DODGE_STAMINA_COST:
            player.stamina -= DODGE_STAMINA_COST
            player.anim = ANIM_DODGE
            player.anim_total = player.anim_left = DODGE_HOLD_TICKS
            if move_l != "idle":
                player.roll_dx, player.roll_dy = self._walk_direction(world, move_l)
            else:
                player.roll_dx = -math.cos(player.orientation)
                player.roll_dy = -math.sin(player.orientation)
            return True, False, False
        return False, False, False

    def _move_player(self, world: World, move_l: str) -> None:
        player = world.player
        if player.anim == ANIM_DODGE:
            player.x += player.roll_dx * PLAYER_ROLL_SPEED
            player.y += player.roll_dy * PLAYER_ROLL_SPEED
            return
        if player.anim != ANIM_IDLE:
            return  # attack and heal animations root the player
        if move_l != "idle":
            dx, dy = self._walk_direction(world, move_l)
            player.x += dx * PLAYER_WALK_SPEED
            player.y += dy * PLAYER_WALK_SPEED
            if not world.lock_on:
                player.orientation = math.atan2(dy, dx)
        if world.lock_on:
            bdx = world.boss.x - player.x
            bdy = world.boss.y - player.y
            if bdx != 0.0 or bdy != 0.0:
                player.orientation = math.atan2(bdy, bdx)

    def _select_boss_move(self, world: World) -> tuple[str, float]:
        boss = world.boss
        d = world.distance
        boss.elapsed = 0
        boss.has_hit = False
        if d > AGGRO_RADIUS:
            boss.move = IDLE_MOVE
            return IDLE_MOVE.name, d
        eligible = [a for a in ROSTERS[world.phase] if a.min_range <= d <= a.max_range]
        if not eligible:
            boss.move = APPROACH_MOVE
            return APPROACH_MOVE.name, d
        candidates = eligible + [HESITATE_MOVE]
        weights = np.array([m.weight for m in candidates])
        idx = int(world.rng.choice(len(candidates), p=weights / weights.sum()))
        boss.move = candidates[idx]
        return boss.move.name, d

    def _boss_tick(self, world: World) -> tuple[float, str, float]:
        boss, player = world.boss, world.player
        selected, selected_dist = "", math.nan
        if boss.elapsed >= boss.move.duration:
            selected, selected_dist = self._select_boss_move(world)
        move = boss.move
        t = boss.elapsed
        damage = 0.0
        to_player = math.atan2(player.y - boss.y, player.x - boss.x)
        if move.is_attack:
            if t < move.windup:
                boss.orientation = _turn_toward(boss.orientation, to_player, BOSS_TURN_WINDUP)
                if move.advance:
                    boss.x += move.advance * math.cos(boss.orientation)
                    boss.y += move.advance * math.sin(boss.orientation)
            elif t < move.windup + move.active:
                if move.advance:
                    boss.x += move.advance * math.cos(boss.orientation)
                    boss.y += move.advance * math.sin(boss.orientation)
                if not boss.has_hit and not player.invulnerable:
                    d = world.distance
                    bearing = math.atan2(player.y - boss.y, player.x - boss.x)
                    off = abs(_wrap_angle(bearing - boss.orientation))
                    if d <= move.reach and off <= move.cone:
                        damage = float(world.rng.uniform(*move.damage))
                        if player.anim == ANIM_ATTACK:
                            damage *= COUNTER_HIT_MULT
                        player.hp = max(0.0, player.hp - damage)
                        boss.has_hit = True
                        if player.anim == ANIM_HEAL:
                            # the hit interrupts the sip before it lands
                            player.anim = ANIM_IDLE
                            player.anim_total = 0
                            player.anim_left = 0
                            player.heal_pending = False
            # recovery ticks: committed and motionless
        else:
            boss.orientation = _turn_toward(boss.orientation, to_player, BOSS_TURN_IDLE)
            if move.pursue and world.distance > BOSS_PREFERRED_RANGE:
                boss.x += BOSS_WALK_SPEED * math.cos(boss.orientation)
                boss.y += BOSS_WALK_SPEED * math.sin(boss.orientation)
        boss.elapsed += 1
        return damage, selected, selected_dist

    def _resolve_player_action(self, world: World) -> tuple[bool, bool]:
        player, boss = world.player, world.boss
        if player.anim == ANIM_ATTACK and player.anim_left == 1:
            d = world.distance
            bearing = math.atan2(boss.y - player.y, boss.x - player.x)
            off = abs(_wrap_angle(bearing - player.orientation))
            if d <= PLAYER_ATTACK_REACH and off <= PLAYER_ATTACK_CONE:
                dmg = float(world.rng.uniform(*PLAYER_ATTACK_DAMAGE))
                mid_swing = (boss.move.is_attack
                             and boss.elapsed <= boss.move.windup + boss.move.active)
                if mid_swing:
                    dmg *= CHIP_DAMAGE_MULT
                boss.hp = max(0.0, boss.hp - dmg)
                return True, False
        elif player.anim == ANIM_HEAL and player.anim_left == 1 and player.heal_pending:
            player.hp = min(player.hp_max, player.hp + HEAL_FRACTION * player.hp_max)
            player.heal_pending = False
            world.estus_remaining -= 1
            return False, True
        return False, False

    def _separate_and_clamp(self, world: World) -> None:
        player, boss = world.player, world.boss
        d = world.distance
        if d < BODY_BLOCK_DIST:
            if d > 0.0:
                ux = (player.x - boss.x) / d
                uy = (player.y - boss.y) / d
            else:
                ux, uy = -math.cos(boss.orientation), -math.sin(boss.orientation)
            player.x = boss.x + ux * BODY_BLOCK_DIST
            player.y = boss.y + uy * BODY_BLOCK_DIST
        radius = world.config.arena_radius
        for entity in (player, boss):
            r = math.hypot(entity.x, entity.y)
            if r > radius:
                entity.x *= radius / r
                entity.y *= radius / r
