"""Dependency-ordered training pipeline and its on-disk run layout.

A run directory holds one stage subdirectory per skill, each with a
checkpoint and an evaluation-curve CSV, plus a manifest recording seeds,
the config hash, and the digest of every artifact. Downstream stages
reload upstream checkpoints from disk and verify those digests, so a
tampered or half-written file fails loudly instead of training on
garbage.
"""
from __future__ import annotations

import csv
import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

from .actions import SKILL_ORDER, SkillId
from .arena import SPAWN_MODES, Arena
from .checkpoint import file_digest, load_checkpoint, save_checkpoint
from .config import (
    arena_config,
    config_hash,
    dqn_kwargs,
    render_config,
    reward_weights,
    section,
)
from .dqn import (
    DqnAgent,
    DqnConfig,
    FrozenSkill,
    frozen_from_arrays,
    train_agents,
    train_skill,
    warm_start_agent,
)
from .errors import IntegrityError, MissingArtifactError, NumericalError, UsageError
from .seeding import derive_seed, make_rng

MANIFEST_NAME = "manifest.txt"
MANIFEST_FORMAT = "skillarena-manifest-1"
CHECKPOINT_NAME = "checkpoint.ckpt"
METRICS_NAME = "metrics.csv"
METRICS_HEADER = ("step", "return_mean", "return_ci95", "ep_len_mean", "win_rate")

# Seed-stream codes, one per trainable unit. Every random draw in a run
# descends from (run_seed, code), so stages never share streams.
STAGE_CODES = {
    SkillId.CAM: 0,
    SkillId.LOCK: 1,
    SkillId.MOVE: 2,
    SkillId.DODGE: 3,
    SkillId.HA: 4,
    SkillId.E2E: 5,
}
FINETUNE_CODE = 6

DEFAULT_BUDGETS = {
    SkillId.CAM: 20_000,
    SkillId.LOCK: 20_000,
    SkillId.MOVE: 20_000,
    SkillId.DODGE: 60_000,
    SkillId.HA: 60_000,
}
DEFAULT_HORIZONS = {
    SkillId.CAM: 128,
    SkillId.LOCK: 64,
    SkillId.MOVE: 128,
    SkillId.DODGE: 512,
    SkillId.HA: 1024,
}
DEFAULT_SPAWNS = {
    SkillId.CAM: "random",
    SkillId.LOCK: "random",
    SkillId.MOVE: "random",
    SkillId.DODGE: "mid",
    SkillId.HA: "mid",
}
FINETUNE_SKILLS = (SkillId.DODGE, SkillId.HA)
FINETUNE_EPS_START = 0.3
DEFAULT_FINETUNE_BUDGET = 30_000
DEFAULT_E2E_BUDGET = 150_000
DEFAULT_E2E_HORIZON = 2048
E2E_BUFFER_CAPACITY = 100_000
E2E_EVAL_EVERY = 5_000


@dataclass(frozen=True)
class StageSpec:
    skill: SkillId
    budget: int
    horizon: int
    spawn_mode: str
    phase: int = 1

    def __post_init__(self):
        if self.budget < 1 or self.horizon < 1:
            raise UsageError(f"stage {self.skill.value}: budget and horizon must be >= 1")
        if self.spawn_mode not in SPAWN_MODES:
            raise UsageError(f"stage {self.skill.value}: unknown spawn mode {self.spawn_mode!r}")


@dataclass(frozen=True)
class CurriculumPlan:
    stages: tuple[StageSpec, ...]
    finetune_budget: int = DEFAULT_FINETUNE_BUDGET
    finetune_spawn: str = "mid"
    e2e_budget: int = DEFAULT_E2E_BUDGET
    e2e_horizon: int = DEFAULT_E2E_HORIZON

    def __post_init__(self):
        order = tuple(stage.skill for stage in self.stages)
        if order != SKILL_ORDER[:5]:
            raise UsageError(
                "curriculum stages must cover cam, lock, move, dodge, ha in order"
            )
        if any(stage.phase != 1 for stage in self.stages):
            raise UsageError("curriculum stages train on phase 1 only")

    def stage(self, skill: SkillId) -> StageSpec:
        for spec in self.stages:
            if spec.skill == skill:
                return spec
        raise UsageError(f"no curriculum stage for skill {skill.value}")


def default_plan() -> CurriculumPlan:
    return CurriculumPlan(
        stages=tuple(
            StageSpec(
                skill=s,
                budget=DEFAULT_BUDGETS[s],
                horizon=DEFAULT_HORIZONS[s],
                spawn_mode=DEFAULT_SPAWNS[s],
            )
            for s in SKILL_ORDER[:5]
        )
    )


def plan_from_mapping(mapping: dict[str, str]) -> CurriculumPlan:
    values = section(mapping, "plan")
    stages = []
    for skill in SKILL_ORDER[:5]:
        key = skill.value
        stages.append(
            StageSpec(
                skill=skill,
                budget=values.get(f"{key}_budget", DEFAULT_BUDGETS[skill]),
                horizon=values.get(f"{key}_horizon", DEFAULT_HORIZONS[skill]),
                spawn_mode=values.get(f"{key}_spawn", DEFAULT_SPAWNS[skill]),
            )
        )
    return CurriculumPlan(
        stages=tuple(stages),
        finetune_budget=values.get("finetune_budget", DEFAULT_FINETUNE_BUDGET),
        finetune_spawn=values.get("finetune_spawn", "mid"),
        e2e_budget=values.get("e2e_budget", DEFAULT_E2E_BUDGET),
        e2e_horizon=values.get("e2e_horizon", DEFAULT_E2E_HORIZON),
    )


def write_metrics(path: Path, rows: list[dict[str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for row in rows:
            writer.writerow(
                [int(row["step"])] + [repr(float(row[k])) for k in METRICS_HEADER[1:]]
            )


def read_metrics(path: Path) -> list[dict[str, float]]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"metrics file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(row[k]) for k in METRICS_HEADER} for row in reader]


def write_manifest(path: Path, entries: dict[str, object]) -> None:
    lines = [f"format = {MANIFEST_FORMAT}\n"]
    lines += [f"{k} = {entries[k]}\n" for k in sorted(entries)]
    Path(path).write_text("".join(lines))


def read_manifest(path: Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"manifest not found: {path}")
    out: dict[str, str] = {}
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    if out.get("format") != MANIFEST_FORMAT:
        raise IntegrityError(f"unrecognized manifest format in {path}")
    return out


def stage_dir(run_dir: Path, skill: SkillId) -> Path:
    return Path(run_dir) / skill.value


def load_verified_checkpoint(path: Path, expected_sha: str | None = None):
    """Checkpoint load that also pins the whole-file digest when known."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"checkpoint not found: {path}")
    if expected_sha is not None:
        actual = file_digest(path)
        if actual != expected_sha:
            raise IntegrityError(
                f"checkpoint digest mismatch for {path}: "
                f"expected {expected_sha}, found {actual}"
            )
    return load_checkpoint(path)


def load_frozen_set(
    run_dir: Path, skills, manifest: dict[str, str] | None = None
) -> dict[SkillId, FrozenSkill]:
    """Frozen upstream skills for composition, digests verified via manifest."""
    run_dir = Path(run_dir)
    if manifest is None:
        manifest = read_manifest(run_dir / MANIFEST_NAME)
    out: dict[SkillId, FrozenSkill] = {}
    for skill in skills:
        rel = manifest.get(f"stage.{skill.value}.checkpoint")
        if rel is None:
            raise MissingArtifactError(
                f"run manifest lists no checkpoint for skill {skill.value}"
            )
        expected = manifest.get(f"stage.{skill.value}.sha256")
        meta, arrays = load_verified_checkpoint(run_dir / rel, expected)
        if meta.get("skill") != skill.value:
            raise IntegrityError(
                f"checkpoint {rel} stores skill {meta.get('skill')!r}, "
                f"expected {skill.value}"
            )
        out[skill] = frozen_from_arrays(meta, arrays)
    return out


def _stage_config(base: dict[str, object], budget: int, **overrides) -> DqnConfig:
    kwargs = dict(base)
    kwargs.update(overrides)
    return DqnConfig(budget=budget, **kwargs)


def run_curriculum(
    out_dir: str | Path,
    mapping: dict[str, str] | None = None,
    seed: int = 0,
    plan: CurriculumPlan | None = None,
) -> dict[str, object]:
    """Train all five skills in order; returns the manifest entries."""
    mapping = dict(mapping or {})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = plan or plan_from_mapping(mapping)
    weights = reward_weights(mapping)
    base_dqn = dqn_kwargs(mapping)
    cfg_hash = config_hash(mapping)
    (out / "config.txt").write_text(render_config(mapping))

    entries: dict[str, object] = {"seed": seed, "config_hash": cfg_hash}
    started = time.monotonic()
    frozen: dict[SkillId, FrozenSkill] = {}
    digests: dict[SkillId, str] = {}
    try:
        for spec in plan.stages:
            skill = spec.skill
            code = STAGE_CODES[skill]
            arena_cfg = arena_config(
                mapping,
                phase=spec.phase,
                spawn_mode=spec.spawn_mode,
                seed=int(derive_seed(seed, code, 3) % (2**31)),
            )
            arena = Arena(arena_cfg)
            cfg = _stage_config(base_dqn, spec.budget)
            agent, result = train_skill(
                skill, arena, cfg, frozen, spec.horizon,
                seed_keys=(seed, code), weights=weights,
            )
            sdir = stage_dir(out, skill)
            sdir.mkdir(parents=True, exist_ok=True)
            meta = agent.checkpoint_meta()
            meta.update(
                {
                    "config_hash": cfg_hash,
                    "seed": seed,
                    "phase": spec.phase,
                    "spawn_mode": spec.spawn_mode,
                    "budget": spec.budget,
                    "horizon": spec.horizon,
                    "upstream": {s.value: digests[s] for s in frozen},
                }
            )
            ckpt_path = sdir / CHECKPOINT_NAME
            sha = save_checkpoint(ckpt_path, meta, agent.export_arrays())
            write_metrics(sdir / METRICS_NAME, result.metrics[skill])
            prefix = f"stage.{skill.value}"
            entries[f"{prefix}.checkpoint"] = f"{skill.value}/{CHECKPOINT_NAME}"
            entries[f"{prefix}.sha256"] = sha
            entries[f"{prefix}.metrics"] = f"{skill.value}/{METRICS_NAME}"
            entries[f"{prefix}.metrics_sha256"] = file_digest(sdir / METRICS_NAME)
            entries[f"{prefix}.budget"] = spec.budget
            entries[f"{prefix}.horizon"] = spec.horizon
            entries[f"{prefix}.spawn_mode"] = spec.spawn_mode
            entries[f"{prefix}.steps"] = agent.steps
            entries[f"{prefix}.episodes"] = result.episodes

            # Downstream stages compose the checkpoint as written to disk,
            # which re-verifies the digest on every load.
            digests[skill] = sha
            meta_loaded, arrays_loaded = load_verified_checkpoint(ckpt_path, sha)
            frozen[skill] = frozen_from_arrays(meta_loaded, arrays_loaded)
    except NumericalError as err:
        entries["status"] = f"aborted:{err}"
        entries["wall_clock_seconds"] = round(time.monotonic() - started, 3)
        write_manifest(out / MANIFEST_NAME, entries)
        raise

    entries["status"] = "complete"
    entries["wall_clock_seconds"] = round(time.monotonic() - started, 3)
    write_manifest(out / MANIFEST_NAME, entries)
    return entries


def train_single_stage(
    skill: SkillId,
    out_dir: str | Path,
    mapping: dict[str, str] | None = None,
    seed: int = 0,
    upstream_dir: str | Path | None = None,
    budget: int | None = None,
    spawn_mode: str | None = None,
    phase: int | None = None,
) -> dict[str, object]:
    """One stage in isolation, loading frozen upstream from another run."""
    mapping = dict(mapping or {})
    plan = plan_from_mapping(mapping)
    weights = reward_weights(mapping)
    cfg_hash = config_hash(mapping)
    if skill == SkillId.E2E:
        e2e_budget = budget if budget is not None else plan.e2e_budget
        if e2e_budget < 1:
            raise UsageError("budget must be >= 1")
        return _train_e2e_stage(out_dir, mapping, seed, e2e_budget, plan.e2e_horizon,
                                spawn_mode or "mid", phase or 1)
    spec = plan.stage(skill)
    if budget is not None or spawn_mode is not None or phase is not None:
        spec = dataclasses.replace(
            spec,
            budget=budget if budget is not None else spec.budget,
            spawn_mode=spawn_mode if spawn_mode is not None else spec.spawn_mode,
            phase=phase if phase is not None else spec.phase,
        )
    upstream = SKILL_ORDER[: SKILL_ORDER.index(skill)]
    frozen: dict[SkillId, FrozenSkill] = {}
    digests: dict[str, str] = {}
    if upstream:
        if upstream_dir is None:
            raise UsageError(
                f"skill {skill.value} needs --load pointing at a run with its upstream stages"
            )
        manifest = read_manifest(Path(upstream_dir) / MANIFEST_NAME)
        frozen = load_frozen_set(upstream_dir, upstream, manifest)
        digests = {s.value: manifest[f"stage.{s.value}.sha256"] for s in upstream}

    code = STAGE_CODES[skill]
    arena = Arena(
        arena_config(
            mapping,
            phase=spec.phase,
            spawn_mode=spec.spawn_mode,
            seed=int(derive_seed(seed, code, 3) % (2**31)),
        )
    )
    cfg = _stage_config(dqn_kwargs(mapping), spec.budget)
    agent, result = train_skill(
        skill, arena, cfg, frozen, spec.horizon, seed_keys=(seed, code),
        weights=weights,
    )
    out = Path(out_dir)
    sdir = stage_dir(out, skill)
    sdir.mkdir(parents=True, exist_ok=True)
    meta = agent.checkpoint_meta()
    meta.update(
        {
            "config_hash": cfg_hash,
            "seed": seed,
            "phase": spec.phase,
            "spawn_mode": spec.spawn_mode,
            "budget": spec.budget,
            "horizon": spec.horizon,
            "upstream": digests,
        }
    )
    sha = save_checkpoint(sdir / CHECKPOINT_NAME, meta, agent.export_arrays())
    write_metrics(sdir / METRICS_NAME, result.metrics[skill])
    return {
        "skill": skill.value,
        "checkpoint": str(sdir / CHECKPOINT_NAME),
        "sha256": sha,
        "steps": agent.steps,
        "episodes": result.episodes,
    }


def finetune_phase2(
    run_dir: str | Path,
    out_dir: str | Path | None = None,
    mapping: dict[str, str] | None = None,
    seed: int = 0,
    budget: int | None = None,
    skills: tuple[SkillId, ...] = FINETUNE_SKILLS,
) -> dict[str, object]:
    """Adapt the reactive skills to phase 2 with everything else frozen.

    Warm-starts from the phase-1 checkpoints with fresh replay buffers and
    a re-warmed exploration schedule, trains both learners in the same
    episodes, and writes new checkpoints without touching the phase-1 run.
    """
    mapping = dict(mapping or {})
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run_dir / "finetune"
    out.mkdir(parents=True, exist_ok=True)
    skills = tuple(skills)
    allowed = set(FINETUNE_SKILLS)
    if not skills or not set(skills) <= allowed:
        raise UsageError("fine-tuning is limited to the dodge and ha skills")
    if SkillId.HA not in skills:
        raise UsageError("fine-tuning needs the ha skill to drive the horizon")

    plan = plan_from_mapping(mapping)
    weights = reward_weights(mapping)
    budget = budget if budget is not None else plan.finetune_budget
    manifest = read_manifest(run_dir / MANIFEST_NAME)
    frozen_skills = [s for s in SKILL_ORDER[:5] if s not in skills]
    frozen = load_frozen_set(run_dir, frozen_skills, manifest)

    base_dqn = dqn_kwargs(mapping)
    base_dqn.setdefault("eps_start", FINETUNE_EPS_START)
    cfg = _stage_config(base_dqn, budget)
    learners: dict[SkillId, DqnAgent] = {}
    for index, skill in enumerate(SKILL_ORDER[:5]):
        if skill not in skills:
            continue
        rel = manifest.get(f"stage.{skill.value}.checkpoint")
        if rel is None:
            raise MissingArtifactError(f"run manifest lists no checkpoint for {skill.value}")
        meta, arrays = load_verified_checkpoint(
            run_dir / rel, manifest.get(f"stage.{skill.value}.sha256")
        )
        learners[skill] = warm_start_agent(
            skill, cfg, meta, arrays, make_rng(seed, FINETUNE_CODE, 0, index)
        )

    arena = Arena(
        arena_config(
            mapping,
            phase=2,
            spawn_mode=plan.finetune_spawn,
            seed=int(derive_seed(seed, FINETUNE_CODE, 3) % (2**31)),
        )
    )
    ha_horizon = plan.stage(SkillId.HA).horizon
    result = train_agents(
        learners, frozen, arena, SkillId.HA, ha_horizon, budget,
        seed_keys=(seed, FINETUNE_CODE), weights=weights,
    )

    entries: dict[str, object] = {
        "seed": seed,
        "config_hash": config_hash(mapping),
        "source_run": str(run_dir),
        "budget": budget,
        "phase": 2,
        "spawn_mode": plan.finetune_spawn,
        "episodes": result.episodes,
        "status": "complete",
    }
    for skill in skills:
        entries[f"upstream.{skill.value}.sha256"] = manifest[
            f"stage.{skill.value}.sha256"
        ]
    for skill, agent in learners.items():
        sdir = out / skill.value
        sdir.mkdir(parents=True, exist_ok=True)
        meta = agent.checkpoint_meta()
        meta.update(
            {
                "config_hash": entries["config_hash"],
                "seed": seed,
                "phase": 2,
                "spawn_mode": plan.finetune_spawn,
                "budget": budget,
                "horizon": ha_horizon,
                "upstream": {
                    s.value: manifest[f"stage.{s.value}.sha256"]
                    for s in SKILL_ORDER[:5]
                },
            }
        )
        sha = save_checkpoint(sdir / CHECKPOINT_NAME, meta, agent.export_arrays())
        write_metrics(sdir / METRICS_NAME, result.metrics[skill])
        prefix = f"stage.{skill.value}"
        entries[f"{prefix}.checkpoint"] = f"{skill.value}/{CHECKPOINT_NAME}"
        entries[f"{prefix}.sha256"] = sha
        entries[f"{prefix}.metrics"] = f"{skill.value}/{METRICS_NAME}"
        entries[f"{prefix}.steps"] = agent.steps
    write_manifest(out / MANIFEST_NAME, entries)
    return entries


def _train_e2e_stage(
    out_dir: str | Path,
    mapping: dict[str, str],
    seed: int,
    budget: int,
    horizon: int,
    spawn_mode: str,
    phase: int,
) -> dict[str, object]:
    weights = reward_weights(mapping)
    base_dqn = dqn_kwargs(mapping)
    base_dqn.setdefault("buffer_capacity", E2E_BUFFER_CAPACITY)
    base_dqn.setdefault("eval_every", E2E_EVAL_EVERY)
    cfg = _stage_config(base_dqn, budget)
    code = STAGE_CODES[SkillId.E2E]
    arena = Arena(
        arena_config(
            mapping,
            phase=phase,
            spawn_mode=spawn_mode,
            seed=int(derive_seed(seed, code, 3) % (2**31)),
        )
    )
    agent = DqnAgent(SkillId.E2E, cfg, make_rng(seed, code, 0))
    result = train_agents(
        {SkillId.E2E: agent}, {}, arena, SkillId.E2E, horizon, budget,
        seed_keys=(seed, code), weights=weights,
    )
    out = Path(out_dir)
    sdir = stage_dir(out, SkillId.E2E)
    sdir.mkdir(parents=True, exist_ok=True)
    meta = agent.checkpoint_meta()
    meta.update(
        {
            "config_hash": config_hash(mapping),
            "seed": seed,
            "phase": phase,
            "spawn_mode": spawn_mode,
            "budget": budget,
            "horizon": horizon,
            "upstream": {},
        }
    )
    sha = save_checkpoint(sdir / CHECKPOINT_NAME, meta, agent.export_arrays())
    write_metrics(sdir / METRICS_NAME, result.metrics[SkillId.E2E])
    entries = {
        "seed": seed,
        "config_hash": meta["config_hash"],
        "status": "complete",
        "stage.e2e.checkpoint": f"e2e/{CHECKPOINT_NAME}",
        "stage.e2e.sha256": sha,
        "stage.e2e.metrics": f"e2e/{METRICS_NAME}",
        "stage.e2e.budget": budget,
        "stage.e2e.horizon": horizon,
        "stage.e2e.spawn_mode": spawn_mode,
        "stage.e2e.steps": agent.steps,
        "stage.e2e.episodes": result.episodes,
    }
    write_manifest(out / MANIFEST_NAME, entries)
    return entries


def train_e2e(
    out_dir: str | Path,
    mapping: dict[str, str] | None = None,
    seed: int = 0,
    budget: int | None = None,
) -> dict[str, object]:
    """Train the flat 16-action learner as a comparison baseline."""
    mapping = dict(mapping or {})
    plan = plan_from_mapping(mapping)
    return _train_e2e_stage(
        out_dir, mapping, seed,
        budget if budget is not None else plan.e2e_budget,
        plan.e2e_horizon, "mid", 1,
    )
