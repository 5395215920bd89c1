"""Frozen-policy evaluation: win rates, ablations, transfer, baselines.

Every report aggregates per-episode numbers produced from per-episode
seeds, so episode order (and worker scheduling, when running parallel)
cannot change the result. Trained skills act near-greedily with a small
exploration floor; ablated skills act uniformly at random; absent skills
hold idle.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actions import SKILL_ORDER, SkillId
from .arena import BOSS_DEFEATED, SPAWN_MODES, Arena, ArenaConfig
from .cadence import EpisodeResult, IdleSource, RandomSource, run_episode
from .curriculum import (
    MANIFEST_NAME,
    load_frozen_set,
    plan_from_mapping,
    read_manifest,
    read_metrics,
    train_e2e,
)
from .dqn import EVAL_EPSILON, EpsilonGreedySource, FrozenSkill, mean_ci95
from .config import arena_config, reward_weights
from .errors import MissingArtifactError, UsageError
from .rewards import DEFAULT_WEIGHTS, RewardWeights
from .seeding import derive_seed, make_rng

SOURCE_KINDS = ("trained", "random", "idle")

# Purpose codes inside one evaluation's seed stream.
_SEED_ARENA = 0
_SEED_SOURCE = 10

# Report codes so the three transfer reports draw independent episodes.
TRANSFER_ZERO_MID = 0
TRANSFER_ZERO_LONG = 1
TRANSFER_FINETUNED = 2


@dataclass(frozen=True)
class EvalSpec:
    """Where and how a policy set is scored."""

    phase: int = 1
    spawn_mode: str = "mid"
    episodes: int = 25
    seed: int = 0
    horizon: int = 1024
    driver: SkillId = SkillId.HA
    epsilon: float = EVAL_EPSILON
    arena_radius: float = 10.0
    tick_seconds: float = 0.1

    def __post_init__(self):
        if self.episodes < 1:
            raise UsageError("episodes must be >= 1")
        if self.spawn_mode not in SPAWN_MODES:
            raise UsageError(f"unknown spawn mode {self.spawn_mode!r}")

    def arena_config(self) -> ArenaConfig:
        return ArenaConfig(
            arena_radius=self.arena_radius,
            tick_seconds=self.tick_seconds,
            phase=self.phase,
            spawn_mode=self.spawn_mode,
            seed=int(derive_seed(self.seed, _SEED_ARENA) % (2**31)),
        )


@dataclass
class EvalReport:
    spec: EvalSpec
    kinds: dict[SkillId, str]
    seeds: list[int] = field(default_factory=list)
    outcomes: list[str] = field(default_factory=list)
    lengths: list[int] = field(default_factory=list)
    returns: dict[SkillId, list[float]] = field(default_factory=dict)

    @property
    def episodes(self) -> int:
        return len(self.outcomes)

    @property
    def win_rate(self) -> float:
        return self.outcomes.count(BOSS_DEFEATED) / max(1, self.episodes)

    @property
    def ep_len_mean(self) -> float:
        return float(np.mean(self.lengths)) if self.lengths else 0.0

    def return_stats(self, skill: SkillId) -> tuple[float, float]:
        return mean_ci95(self.returns[skill])

    def as_dict(self) -> dict:
        out = {
            "phase": self.spec.phase,
            "spawn_mode": self.spec.spawn_mode,
            "episodes": self.episodes,
            "win_rate": self.win_rate,
            "ep_len_mean": self.ep_len_mean,
            "sources": {s.value: k for s, k in self.kinds.items()},
            "returns": {},
        }
        for skill in self.returns:
            mean, ci = self.return_stats(skill)
            out["returns"][skill.value] = {"mean": mean, "ci95": ci}
        return out

    def summary_lines(self) -> list[str]:
        src = " ".join(f"{s.value}={k}" for s, k in self.kinds.items())
        lines = [
            f"phase={self.spec.phase} spawn={self.spec.spawn_mode} "
            f"episodes={self.episodes} [{src}]",
            f"win_rate = {self.win_rate:.4f}",
            f"ep_len_mean = {self.ep_len_mean:.2f} ticks",
        ]
        for skill in self.returns:
            mean, ci = self.return_stats(skill)
            lines.append(f"return[{skill.value}] = {mean:.4f} +/- {ci:.4f}")
        return lines

    def episode_rows(self) -> list[list]:
        skills = list(self.returns)
        rows = [["episode", "seed", "outcome", "ticks"] + [s.value for s in skills]]
        for i in range(self.episodes):
            rows.append(
                [i, self.seeds[i], self.outcomes[i], self.lengths[i]]
                + [repr(self.returns[s][i]) for s in skills]
            )
        return rows


def _episode_runtimes(
    kinds: dict[SkillId, str],
    frozen: dict[SkillId, FrozenSkill],
    spec: EvalSpec,
    index: int,
):
    from .cadence import SkillRuntime

    runtimes = []
    order = (SkillId.E2E,) if SkillId.E2E in kinds else SKILL_ORDER[:5]
    for slot, skill in enumerate(order):
        kind = kinds.get(skill, "idle")
        if kind == "trained":
            fz = frozen[skill]
            source = EpsilonGreedySource(
                fz.net, spec.epsilon, make_rng(spec.seed, index, _SEED_SOURCE + slot)
            )
            runtimes.append(SkillRuntime(skill, source, stats=fz.stats))
        elif kind == "random":
            runtimes.append(
                SkillRuntime(
                    skill,
                    RandomSource(skill, make_rng(spec.seed, index, _SEED_SOURCE + slot)),
                )
            )
        elif kind == "idle":
            runtimes.append(SkillRuntime(skill, IdleSource(skill)))
        else:
            raise UsageError(f"unknown source kind {kind!r} for {skill.value}")
    return runtimes


def _run_eval_episode(args) -> tuple[int, int, str, int, dict[SkillId, float]]:
    kinds, frozen, spec, weights, index = args
    arena = Arena(spec.arena_config())
    runtimes = _episode_runtimes(kinds, frozen, spec, index)
    seed = int(derive_seed(spec.seed, index, _SEED_ARENA))
    result: EpisodeResult = run_episode(
        arena, runtimes, seed=seed, horizon_skill=spec.driver,
        horizon=spec.horizon, weights=weights,
    )
    return index, seed, result.outcome, result.ticks, dict(result.returns)


def evaluate(
    kinds: dict[SkillId, str],
    frozen: dict[SkillId, FrozenSkill],
    spec: EvalSpec,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    jobs: int = 1,
) -> EvalReport:
    """Score one policy set over `spec.episodes` independent episodes."""
    for skill, kind in kinds.items():
        if kind == "trained" and skill not in frozen:
            raise MissingArtifactError(f"no checkpoint loaded for skill {skill.value}")
    if spec.driver not in kinds:
        raise UsageError(f"driver skill {spec.driver.value} is not in the policy set")
    tasks = [(kinds, frozen, spec, weights, i) for i in range(spec.episodes)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_eval_episode, tasks))
    else:
        results = [_run_eval_episode(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    report = EvalReport(spec=spec, kinds=dict(kinds))
    report.returns = {s: [] for s in (kinds if SkillId.E2E in kinds else SKILL_ORDER[:5])}
    for _, seed, outcome, ticks, returns in results:
        report.seeds.append(seed)
        report.outcomes.append(outcome)
        report.lengths.append(ticks)
        for skill in report.returns:
            report.returns[skill].append(returns.get(skill, 0.0))
    return report


def composed_kinds(randomize: tuple[SkillId, ...] = ()) -> dict[SkillId, str]:
    kinds = {s: "trained" for s in SKILL_ORDER[:5]}
    for skill in randomize:
        if skill not in kinds:
            raise UsageError(f"cannot randomize unknown skill {skill}")
        kinds[skill] = "random"
    return kinds


def eval_run(
    run_dir: str | Path,
    mapping: dict[str, str] | None = None,
    spec: EvalSpec | None = None,
    randomize: tuple[SkillId, ...] = (),
    finetune_dir: str | Path | None = None,
    jobs: int = 1,
    dump_episode0: str | Path | None = None,
) -> EvalReport:
    """Evaluate a trained run directory's composed policy set."""
    mapping = dict(mapping or {})
    weights = reward_weights(mapping)
    plan = plan_from_mapping(mapping)
    frozen = load_frozen_set(run_dir, SKILL_ORDER[:5])
    if finetune_dir is not None:
        ft_manifest = read_manifest(Path(finetune_dir) / MANIFEST_NAME)
        tuned = load_frozen_set(
            finetune_dir,
            [s for s in (SkillId.DODGE, SkillId.HA)
             if f"stage.{s.value}.checkpoint" in ft_manifest],
            ft_manifest,
        )
        frozen.update(tuned)
    if spec is None:
        spec = EvalSpec(horizon=plan.stage(SkillId.HA).horizon)
    kinds = composed_kinds(randomize)
    report = evaluate(kinds, frozen, spec, weights, jobs)
    if dump_episode0 is not None:
        from .trajectory import TrajectoryRecorder

        config = spec.arena_config()
        recorder = TrajectoryRecorder(config, seed=report.seeds[0])
        run_episode(
            Arena(config), _episode_runtimes(kinds, frozen, spec, 0),
            seed=report.seeds[0], horizon_skill=spec.driver,
            horizon=spec.horizon, weights=weights, recorder=recorder,
        )
        recorder.save(dump_episode0)
    return report


def transfer_eval(
    run_dir: str | Path,
    mapping: dict[str, str] | None = None,
    seed: int = 0,
    episodes: int = 25,
    finetune_dir: str | Path | None = None,
    jobs: int = 1,
) -> dict[str, EvalReport]:
    """Phase-2 generalization: zero-shot at both spawns, then fine-tuned."""
    mapping = dict(mapping or {})
    run_dir = Path(run_dir)
    weights = reward_weights(mapping)
    plan = plan_from_mapping(mapping)
    horizon = plan.stage(SkillId.HA).horizon
    frozen = load_frozen_set(run_dir, SKILL_ORDER[:5])
    kinds = composed_kinds()

    def spec_for(code: int, spawn: str) -> EvalSpec:
        return EvalSpec(
            phase=2, spawn_mode=spawn, episodes=episodes,
            seed=int(derive_seed(seed, 20, code)), horizon=horizon,
        )

    reports = {
        "zero_shot_mid": evaluate(
            kinds, frozen, spec_for(TRANSFER_ZERO_MID, "mid"), weights, jobs
        ),
        "zero_shot_long": evaluate(
            kinds, frozen, spec_for(TRANSFER_ZERO_LONG, "long"), weights, jobs
        ),
    }
    if finetune_dir is None:
        finetune_dir = run_dir / "finetune"
    ft_manifest = read_manifest(Path(finetune_dir) / MANIFEST_NAME)
    tuned = dict(frozen)
    tuned.update(
        load_frozen_set(
            finetune_dir,
            [s for s in (SkillId.DODGE, SkillId.HA)
             if f"stage.{s.value}.checkpoint" in ft_manifest],
            ft_manifest,
        )
    )
    reports["finetuned"] = evaluate(
        kinds, tuned, spec_for(TRANSFER_FINETUNED, "mid"), weights, jobs
    )
    return reports


def skill_gain_reports(
    run_dir: str | Path,
    skill: SkillId,
    mapping: dict[str, str] | None = None,
    seed: int = 0,
    episodes: int = 25,
    jobs: int = 1,
) -> dict[str, EvalReport]:
    """One skill trained vs random in its own training context.

    Upstream skills stay trained, downstream ones hold idle, and both
    reports share episode seeds so the comparison is paired.
    """
    mapping = dict(mapping or {})
    weights = reward_weights(mapping)
    plan = plan_from_mapping(mapping)
    stage = plan.stage(skill)
    position = SKILL_ORDER.index(skill)
    frozen = load_frozen_set(run_dir, SKILL_ORDER[: position + 1])
    kinds = {s: "trained" for s in SKILL_ORDER[: position + 1]}
    for later in SKILL_ORDER[position + 1 : 5]:
        kinds[later] = "idle"
    spec = EvalSpec(
        phase=stage.phase, spawn_mode=stage.spawn_mode, episodes=episodes,
        seed=int(derive_seed(seed, 30, position)), horizon=stage.horizon,
        driver=skill,
    )
    trained = evaluate(kinds, frozen, spec, weights, jobs)
    random_kinds = dict(kinds)
    random_kinds[skill] = "random"
    random = evaluate(random_kinds, frozen, spec, weights, jobs)
    return {"trained": trained, "random": random}


def dodge_diagnostics(
    run_dir: str | Path,
    mapping: dict[str, str] | None = None,
    seed: int = 0,
    episodes: int = 25,
    jobs: int = 1,
) -> dict[str, object]:
    """Survival-time check: trained dodge vs uniform-random dodge."""
    mapping = dict(mapping or {})
    run_dir = Path(run_dir)
    curve = read_metrics(run_dir / SkillId.DODGE.value / "metrics.csv")
    reports = skill_gain_reports(
        run_dir, SkillId.DODGE, mapping, seed=seed, episodes=episodes, jobs=jobs
    )
    trained_len = reports["trained"].ep_len_mean
    random_len = reports["random"].ep_len_mean
    ratio = trained_len / random_len if random_len > 0 else float("inf")
    return {
        "curve": curve,
        "trained": reports["trained"],
        "random": reports["random"],
        "trained_ep_len": trained_len,
        "random_ep_len": random_len,
        "ratio": ratio,
    }


def moving_average(values, window: int = 10) -> list[float]:
    out = []
    acc: list[float] = []
    for v in values:
        acc.append(float(v))
        if len(acc) > window:
            acc.pop(0)
        out.append(sum(acc) / len(acc))
    return out


CURVES_HEADER = (
    "step", "return_mean", "return_ma10", "ep_len_mean", "ep_len_ma10", "win_rate",
)


def write_curves(path: Path, rows: list[dict[str, float]]) -> None:
    returns_ma = moving_average([r["return_mean"] for r in rows])
    lens_ma = moving_average([r["ep_len_mean"] for r in rows])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVES_HEADER)
        for row, r_ma, l_ma in zip(rows, returns_ma, lens_ma):
            writer.writerow(
                [
                    int(row["step"]),
                    repr(float(row["return_mean"])), repr(r_ma),
                    repr(float(row["ep_len_mean"])), repr(l_ma),
                    repr(float(row["win_rate"])),
                ]
            )


def e2e_baseline(
    out_dir: str | Path,
    mapping: dict[str, str] | None = None,
    seed: int = 0,
    budget: int | None = None,
) -> dict[str, object]:
    """Train the flat learner and emit raw plus smoothed learning curves."""
    mapping = dict(mapping or {})
    entries = train_e2e(out_dir, mapping, seed=seed, budget=budget)
    out = Path(out_dir)
    rows = read_metrics(out / "e2e" / "metrics.csv")
    write_curves(out / "e2e" / "curves.csv", rows)
    entries["stage.e2e.curves"] = "e2e/curves.csv"
    return entries


def write_report(path: Path, report: EvalReport, fmt: str = "csv") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(report.episode_rows())
    else:
        raise UsageError(f"unknown metrics format {fmt!r}")
