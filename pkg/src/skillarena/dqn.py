"""Value-based learner: replay, target network, epsilon-greedy exploration.

One agent learns one skill's action values over its projected observation.
Decision steps are the budget currency: epsilon anneals over the first
fraction of the budget, gradient steps run every `train_freq` completed
transitions after warm-up, and the target network hard-updates on a fixed
cadence. Evaluation snapshots run every `eval_every` steps with fresh
seeded streams so they never perturb training randomness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .actions import ACTION_SET_SIZES, SkillId, SKILL_ORDER
from .arena import Arena
from .buffer import ReplayBuffer
from .cadence import IdleSource, SkillRuntime, run_episode
from .errors import NumericalError, UsageError
from .features import OBS_DIMS
from .nets import Adam, Mlp, huber, huber_grad
from .normalize import RunningStats
from .rewards import DEFAULT_WEIGHTS, RewardWeights
from .seeding import derive_seed, make_rng

EVAL_EPSILON = 0.05

# Purpose codes for seed-key derivation.
_SEED_INIT = 0
_SEED_EPISODE = 1
_SEED_EVAL = 2


@dataclass(frozen=True)
class DqnConfig:
    budget: int
    learning_rate: float = 3e-4
    batch_size: int = 256
    gamma: float = 0.99
    train_freq: int = 4
    target_update: int = 10_000
    warmup: int = 1_000
    eps_start: float = 1.0
    eps_final: float = 0.05
    eps_fraction: float = 0.1
    buffer_capacity: int | None = None  # default: one third of the budget
    hidden: tuple[int, ...] = (64, 64)
    eval_every: int = 1_000
    eval_episodes: int = 5

    def __post_init__(self):
        positive = {
            "budget": self.budget,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "train_freq": self.train_freq,
            "target_update": self.target_update,
            "warmup": self.warmup,
            "eps_fraction": self.eps_fraction,
            "eval_every": self.eval_every,
            "eval_episodes": self.eval_episodes,
        }
        for name, value in positive.items():
            if value <= 0:
                raise UsageError(f"dqn.{name} must be positive, got {value}")
        if not 0.0 <= self.gamma <= 1.0:
            raise UsageError(f"dqn.gamma must be in [0, 1], got {self.gamma}")
        for name, eps in (("eps_start", self.eps_start), ("eps_final", self.eps_final)):
            if not 0.0 <= eps <= 1.0:
                raise UsageError(f"dqn.{name} must be in [0, 1], got {eps}")
        if self.buffer_capacity is not None and self.buffer_capacity <= 0:
            raise UsageError("dqn.buffer_capacity must be positive when set")
        if self.warmup < self.batch_size:
            raise UsageError("dqn.warmup must cover at least one batch")

    @property
    def capacity(self) -> int:
        if self.buffer_capacity is not None:
            return self.buffer_capacity
        # One third of the budget, but never smaller than one batch so
        # toy-sized budgets can still draw without replacement.
        return max(math.ceil(self.budget / 3), self.batch_size)

    def epsilon(self, step: int) -> float:
        """Linear anneal from eps_start to eps_final over the first fraction."""
        span = self.eps_fraction * self.budget
        frac = min(1.0, step / span)
        return self.eps_start + frac * (self.eps_final - self.eps_start)


def td_targets(
    rewards: np.ndarray,
    next_obs: np.ndarray,
    dones: np.ndarray,
    target_net: Mlp,
    gamma: float,
) -> np.ndarray:
    """One-step bootstrap y = r + gamma * (1 - done) * max_a Q_target(s', a)."""
    next_q = target_net.forward(next_obs).max(axis=1)
    return rewards + gamma * (1.0 - dones.astype(np.float64)) * next_q


def act_epsilon_greedy(net: Mlp, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Ties in the greedy branch break toward the lowest action index."""
    n_actions = net.sizes[-1]
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    q = net.forward(obs)[0]
    return int(np.argmax(q))


class EpsilonGreedySource:
    """Fixed-epsilon policy over a frozen network, for cadence runtimes."""

    needs_obs = True

    def __init__(self, net: Mlp, epsilon: float, rng: np.random.Generator):
        self.net = net
        self.epsilon = epsilon
        self.rng = rng

    def act(self, obs: np.ndarray) -> int:
        return act_epsilon_greedy(self.net, obs, self.epsilon, self.rng)


@dataclass
class FrozenSkill:
    """A trained skill loaded read-only: its network and observation stats."""

    net: Mlp
    stats: RunningStats


class DqnAgent:
    """Online learner that plugs into a cadence runtime as source and hook."""

    needs_obs = True

    def __init__(self, skill: SkillId, config: DqnConfig, rng: np.random.Generator):
        self.skill = skill
        self.config = config
        obs_dim = OBS_DIMS[skill]
        sizes = [obs_dim, *config.hidden, ACTION_SET_SIZES[skill]]
        self.net = Mlp(sizes, rng)
        self.target = self.net.clone()
        self.buffer = ReplayBuffer(config.capacity, obs_dim)
        self.optimizer = Adam(self.net.params, lr=config.learning_rate)
        self.stats = RunningStats(obs_dim)
        self.rng = rng
        self.steps = 0
        self.transitions = 0
        self.grad_steps = 0
        self.last_loss = math.nan

    def act(self, obs: np.ndarray) -> int:
        eps = self.config.epsilon(self.steps)
        self.steps += 1
        return act_epsilon_greedy(self.net, obs, eps, self.rng)

    def observe(self, obs, action: int, reward: float, next_obs, done: bool) -> None:
        self.buffer.add(obs, action, reward, next_obs, done)
        self.transitions += 1
        if self.transitions >= self.config.warmup and self.transitions % self.config.train_freq == 0:
            self.train_step()
        if self.transitions % self.config.target_update == 0:
            self.target.copy_from(self.net)

    def train_step(self) -> None:
        cfg = self.config
        obs, actions, rewards, next_obs, dones = self.buffer.sample(cfg.batch_size, self.rng)
        targets = td_targets(rewards, next_obs, dones, self.target, cfg.gamma)
        q, acts = self.net._forward_cached(obs)
        rows = np.arange(len(actions))
        residual = q[rows, actions] - targets
        loss = float(huber(residual).mean())
        if not math.isfinite(loss):
            raise NumericalError(
                f"non-finite loss for skill {self.skill.value} at gradient step "
                f"{self.grad_steps}: loss={loss}, max|q|={np.abs(q).max():.3e}, "
                f"max|target|={np.abs(targets).max():.3e}"
            )
        dout = np.zeros_like(q)
        dout[rows, actions] = huber_grad(residual) / len(actions)
        grads = self.net.backward(acts, dout)
        self.optimizer.step(self.net.params, grads)
        self.net.assert_finite()
        self.grad_steps += 1
        self.last_loss = loss

    def export_arrays(self) -> dict[str, np.ndarray]:
        arrays: dict[str, np.ndarray] = {}
        for i, p in enumerate(self.net.params):
            arrays[f"param_{i}"] = p.copy()
        for i, m in enumerate(self.optimizer.m):
            arrays[f"adam_m_{i}"] = m.copy()
        for i, v in enumerate(self.optimizer.v):
            arrays[f"adam_v_{i}"] = v.copy()
        for key, value in self.stats.state_dict().items():
            arrays[f"stats_{key}"] = value
        arrays["counters"] = np.array(
            [self.steps, self.transitions, self.grad_steps, self.optimizer.t],
            dtype=np.int64,
        )
        return arrays

    def checkpoint_meta(self) -> dict:
        return {"skill": self.skill.value, "layer_sizes": self.net.sizes}


def frozen_from_arrays(meta: dict, arrays: dict[str, np.ndarray]) -> FrozenSkill:
    sizes = list(meta["layer_sizes"])
    net = Mlp(sizes)
    net.params = [arrays[f"param_{i}"] for i in range(2 * (len(sizes) - 1))]
    net.assert_finite()
    stats = RunningStats(sizes[0])
    stats.load_state_dict(
        {
            "count": arrays["stats_count"],
            "mean": arrays["stats_mean"],
            "m2": arrays["stats_m2"],
        }
    )
    return FrozenSkill(net=net, stats=stats)


def warm_start_agent(
    skill: SkillId, config: DqnConfig, meta: dict, arrays: dict[str, np.ndarray],
    rng: np.random.Generator,
) -> DqnAgent:
    """Fresh learner initialized from a checkpoint: parameters and stats
    carry over, replay and optimizer moments start empty."""
    agent = DqnAgent(skill, config, rng)
    source = frozen_from_arrays(meta, arrays)
    if source.net.sizes != agent.net.sizes:
        raise UsageError(
            f"checkpoint layout {source.net.sizes} does not fit skill {skill.value}"
        )
    agent.net.copy_from(source.net)
    agent.target.copy_from(source.net)
    agent.stats = source.stats
    return agent


def mean_ci95(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    half = 1.96 * arr.std(ddof=1) / math.sqrt(arr.size)
    return float(arr.mean()), float(half)


def _eval_runtimes(
    learners: dict[SkillId, DqnAgent],
    frozen: dict[SkillId, FrozenSkill],
    seed_keys: tuple[int, ...],
    mark: int,
) -> list[SkillRuntime]:
    if SkillId.E2E in learners:
        agent = learners[SkillId.E2E]
        source = EpsilonGreedySource(
            agent.net, EVAL_EPSILON, make_rng(*seed_keys, _SEED_EVAL, mark, 0)
        )
        return [SkillRuntime(SkillId.E2E, source, stats=agent.stats.copy())]
    runtimes = []
    for i, skill in enumerate(SKILL_ORDER):
        rng = make_rng(*seed_keys, _SEED_EVAL, mark, i)
        if skill in learners:
            agent = learners[skill]
            source = EpsilonGreedySource(agent.net, EVAL_EPSILON, rng)
            runtimes.append(SkillRuntime(skill, source, stats=agent.stats.copy()))
        elif skill in frozen:
            fz = frozen[skill]
            source = EpsilonGreedySource(fz.net, EVAL_EPSILON, rng)
            runtimes.append(SkillRuntime(skill, source, stats=fz.stats))
        else:
            runtimes.append(SkillRuntime(skill, IdleSource(skill)))
    return runtimes


def _evaluate_mark(
    learners, frozen, arena: Arena, driver_skill: SkillId, horizon: int,
    seed_keys: tuple[int, ...], mark: int, episodes: int, weights: RewardWeights,
) -> dict[SkillId, dict[str, float]]:
    runtimes = _eval_runtimes(learners, frozen, seed_keys, mark)
    returns: dict[SkillId, list[float]] = {s: [] for s in learners}
    lengths: list[int] = []
    wins = 0
    for ep in range(episodes):
        seed = derive_seed(*seed_keys, _SEED_EVAL, mark, 1000 + ep)
        result = run_episode(
            arena, runtimes, seed=seed, horizon_skill=driver_skill,
            horizon=horizon, weights=weights,
        )
        lengths.append(result.ticks)
        wins += result.win
        for skill in learners:
            returns[skill].append(result.returns[skill])
    rows: dict[SkillId, dict[str, float]] = {}
    for skill in learners:
        mean, ci = mean_ci95(returns[skill])
        rows[skill] = {
            "step": mark,
            "return_mean": mean,
            "return_ci95": ci,
            "ep_len_mean": float(np.mean(lengths)),
            "win_rate": wins / episodes,
        }
    return rows


@dataclass
class TrainResult:
    metrics: dict[SkillId, list[dict[str, float]]]
    episodes: int = 0


def train_agents(
    learners: dict[SkillId, DqnAgent],
    frozen: dict[SkillId, FrozenSkill],
    arena: Arena,
    driver_skill: SkillId,
    horizon: int,
    budget: int,
    seed_keys: tuple[int, ...],
    weights: RewardWeights = DEFAULT_WEIGHTS,
    eval_every: int | None = None,
    eval_episodes: int | None = None,
) -> TrainResult:
    """Run the cadence loop until any learner exhausts the decision budget.

    All learners act and learn inside the same episodes; frozen skills act
    with fixed parameters; skills in neither set hold idle.
    """
    if driver_skill not in learners:
        raise UsageError("the horizon-driving skill must be one of the learners")
    driver = learners[driver_skill]
    eval_every = eval_every if eval_every is not None else driver.config.eval_every
    eval_episodes = (
        eval_episodes if eval_episodes is not None else driver.config.eval_episodes
    )

    if SkillId.E2E in learners:
        agent = learners[SkillId.E2E]
        runtimes = [
            SkillRuntime(
                SkillId.E2E, agent, stats=agent.stats, training=True,
                on_transition=agent.observe,
            )
        ]
    else:
        runtimes = []
        for skill in SKILL_ORDER:
            if skill in learners:
                agent = learners[skill]
                runtimes.append(
                    SkillRuntime(
                        skill, agent, stats=agent.stats, training=True,
                        on_transition=agent.observe,
                    )
                )
            elif skill in frozen:
                fz = frozen[skill]
                source = EpsilonGreedySource(
                    fz.net, EVAL_EPSILON,
                    make_rng(*seed_keys, _SEED_INIT, 100 + SKILL_ORDER.index(skill)),
                )
                runtimes.append(SkillRuntime(skill, source, stats=fz.stats))
            else:
                runtimes.append(SkillRuntime(skill, IdleSource(skill)))

    def exhausted() -> bool:
        return any(agent.steps >= budget for agent in learners.values())

    result = TrainResult(metrics={s: [] for s in learners})
    next_mark = eval_every
    episode_index = 0
    while not exhausted():
        seed = derive_seed(*seed_keys, _SEED_EPISODE, episode_index)
        run_episode(
            arena, runtimes, seed=seed, horizon_skill=driver_skill,
            horizon=horizon, weights=weights, stop=exhausted,
        )
        episode_index += 1
        while next_mark <= driver.steps:
            rows = _evaluate_mark(
                learners, frozen, arena, driver_skill, horizon,
                seed_keys, next_mark, eval_episodes, weights,
            )
            for skill, row in rows.items():
                result.metrics[skill].append(row)
            next_mark += eval_every
    result.episodes = episode_index
    return result


def train_skill(
    skill: SkillId,
    arena: Arena,
    config: DqnConfig,
    frozen: dict[SkillId, FrozenSkill],
    horizon: int,
    seed_keys: tuple[int, ...],
    weights: RewardWeights = DEFAULT_WEIGHTS,
    agent: DqnAgent | None = None,
) -> tuple[DqnAgent, TrainResult]:
    """Train one skill with everything upstream frozen."""
    if agent is None:
        agent = DqnAgent(skill, config, make_rng(*seed_keys, _SEED_INIT))
    result = train_agents(
        {skill: agent}, frozen, arena, skill, horizon, config.budget,
        seed_keys, weights,
    )
    return agent, result
