"""Shared-clock execution of asynchronously cadenced skills.

Each skill re-decides exactly when its current action's hold expires, so
skills with long actions (dodge, attack, heal) naturally run at a slower
cadence than camera or movement. The most recent sub-actions merge into
one composite per tick. Movement and camera choices repeat for their
whole hold; dodge, attack, heal, and lock toggles fire once and read
idle for the remainder.

A skill's transition spans from one of its decisions to the next, with
the per-tick shaped rewards summed over the span. Truncated episodes
finalize spans with done=False so the learner still bootstraps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .actions import (
    ACTION_SET_SIZES,
    IDLE_INDEX,
    CompositeAction,
    SkillId,
    compose,
    decode_e2e,
    hold_duration,
)
from .arena import Arena, BOSS_DEFEATED, ONGOING, PLAYER_DEAD, TRUNCATED, StepEvents
from .errors import UsageError
from .features import F_STAMINA, OBS_DIMS, derive_features, project
from .normalize import RunningStats
from .rewards import (
    DEFAULT_WEIGHTS,
    RewardWeights,
    reward_cam,
    reward_dodge,
    reward_e2e,
    reward_ha,
    reward_lock,
    reward_move,
)

# Slots that fire once per decision; camera and movement repeat instead.
IMPULSE_SKILLS = frozenset({SkillId.LOCK, SkillId.DODGE, SkillId.HA})

TransitionHook = Callable[[np.ndarray, int, float, np.ndarray, bool], None]
Recorder = Callable[[int, np.ndarray, CompositeAction, StepEvents], None]


class IdleSource:
    """Placeholder for skills that are disabled or not yet trained."""

    needs_obs = False

    def __init__(self, skill: SkillId):
        self.action = IDLE_INDEX[skill]

    def act(self, obs) -> int:
        return self.action


class RandomSource:
    """Uniform policy over a skill's action set, for ablations and baselines."""

    needs_obs = False

    def __init__(self, skill: SkillId, rng: np.random.Generator):
        self.n = ACTION_SET_SIZES[skill]
        self.rng = rng

    def act(self, obs) -> int:
        return int(self.rng.integers(self.n))


def tick_rewards(
    state: np.ndarray, events: StepEvents, weights: RewardWeights = DEFAULT_WEIGHTS
) -> dict[SkillId, float]:
    """All six shaped rewards for the tick that produced `state`."""
    sigma = float(state[F_STAMINA])
    return {
        SkillId.CAM: reward_cam(state, weights),
        SkillId.LOCK: reward_lock(state, weights),
        SkillId.MOVE: reward_move(state, weights, sideways=events.sideways),
        SkillId.DODGE: reward_dodge(events.delta, sigma, weights),
        SkillId.HA: reward_ha(events.delta, weights, sigma),
        SkillId.E2E: reward_e2e(events.delta, weights, sigma),
    }


class SkillRuntime:
    """One skill's cadence state: its source, stats, and open decision span."""

    def __init__(
        self,
        skill: SkillId,
        source,
        stats: RunningStats | None = None,
        training: bool = False,
        on_transition: TransitionHook | None = None,
    ):
        self.skill = skill
        self.source = source
        self.stats = stats if stats is not None else RunningStats(OBS_DIMS[skill])
        self.training = training
        self.on_transition = on_transition
        self.decisions = 0  # lifetime decision count, drives budgets
        self.episode_decisions = 0
        self.episode_return = 0.0
        self.hold_left = 0
        self.current_action = IDLE_INDEX[skill]
        self.fresh = False
        self._pending: tuple[np.ndarray, int, float] | None = None

    def begin_episode(self) -> None:
        self.episode_decisions = 0
        self.episode_return = 0.0
        self.hold_left = 0
        self.current_action = IDLE_INDEX[self.skill]
        self.fresh = False
        self._pending = None

    def _observe(self, state: np.ndarray) -> np.ndarray | None:
        if not (self.training or self.on_transition or getattr(self.source, "needs_obs", True)):
            return None
        obs = project(state, self.skill)
        return self.stats.transform(obs, update=self.training)

    def decide(self, state: np.ndarray, estus_remaining: int) -> None:
        obs = self._observe(state)
        if self._pending is not None and self.on_transition is not None:
            prev_obs, prev_action, span_reward = self._pending
            self.on_transition(prev_obs, prev_action, span_reward, obs, False)
        action = self.source.act(obs)
        self.current_action = action
        self.hold_left = hold_duration(self.skill, action, estus_remaining)
        self.fresh = True
        self.decisions += 1
        self.episode_decisions += 1
        if self.on_transition is not None:
            self._pending = (obs, action, 0.0)

    def accrue(self, reward: float) -> None:
        self.episode_return += reward
        if self._pending is not None:
            obs, action, span_reward = self._pending
            self._pending = (obs, action, span_reward + reward)

    def finish_episode(self, state: np.ndarray, terminal: bool) -> None:
        if self._pending is not None and self.on_transition is not None:
            obs, action, span_reward = self._pending
            next_obs = self._observe(state)
            self.on_transition(obs, action, span_reward, next_obs, terminal)
        self._pending = None


def merge_actions(runtimes: Sequence[SkillRuntime]) -> CompositeAction:
    """Most-recent-output merge with consumed-once impulse slots."""
    if len(runtimes) == 1 and runtimes[0].skill == SkillId.E2E:
        rt = runtimes[0]
        composite = decode_e2e(rt.current_action)
        if not rt.fresh:
            composite = CompositeAction(camera=composite.camera, move=composite.move)
        return composite
    latest: dict[SkillId, int] = {}
    for rt in runtimes:
        if rt.skill in IMPULSE_SKILLS and not rt.fresh:
            continue
        latest[rt.skill] = rt.current_action
    return compose(latest)


@dataclass
class EpisodeResult:
    outcome: str
    ticks: int
    seed: int
    returns: dict[SkillId, float] = field(default_factory=dict)
    decisions: dict[SkillId, int] = field(default_factory=dict)

    @property
    def win(self) -> bool:
        return self.outcome == BOSS_DEFEATED


def run_episode(
    arena: Arena,
    runtimes: Sequence[SkillRuntime],
    seed: int,
    horizon_skill: SkillId,
    horizon: int,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    recorder: Recorder | None = None,
    stop: Callable[[], bool] | None = None,
) -> EpisodeResult:
    """Roll one episode, truncating after `horizon` driver decisions."""
    if horizon < 1:
        raise UsageError(f"episode horizon must be at least 1, got {horizon}")
    driver = next((rt for rt in runtimes if rt.skill == horizon_skill), None)
    if driver is None:
        raise UsageError(f"no runtime for horizon skill {horizon_skill.value}")
    world = arena.reset(seed)
    state = derive_features(world)
    for rt in runtimes:
        rt.begin_episode()
    while world.episode_outcome == ONGOING:
        if driver.hold_left <= 0 and driver.episode_decisions >= horizon:
            world.episode_outcome = TRUNCATED
            break
        if stop is not None and stop():
            world.episode_outcome = TRUNCATED
            break
        for rt in runtimes:
            if rt.hold_left <= 0:
                rt.decide(state, world.estus_remaining)
        composite = merge_actions(runtimes)
        events = arena.step(world, composite)
        state = derive_features(world)
        rewards = tick_rewards(state, events, weights)
        for rt in runtimes:
            rt.accrue(rewards[rt.skill])
            rt.hold_left -= 1
            rt.fresh = False
        if recorder is not None:
            recorder(world.tick - 1, state, composite, events)
    terminal = world.episode_outcome in (PLAYER_DEAD, BOSS_DEFEATED)
    for rt in runtimes:
        rt.finish_episode(state, terminal)
    return EpisodeResult(
        outcome=world.episode_outcome,
        ticks=world.tick,
        seed=seed,
        returns={rt.skill: rt.episode_return for rt in runtimes},
        decisions={rt.skill: rt.episode_decisions for rt in runtimes},
    )
