"""Command-line front end.

Every command exits 0 on success and prints one machine-parsable
`error: <Kind>: <message>` line on failure, with the exit code naming
the failure class: 2 usage, 3 missing artifact, 4 integrity, 5 numerical.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .actions import (
    ACTION_LABELS,
    ACTION_SET_SIZES,
    SKILL_ORDER,
    SkillId,
    decode_e2e,
    hold_duration,
)
from .arena import SPAWN_MODES
from .config import load_config_file
from .curriculum import (
    finetune_phase2,
    plan_from_mapping,
    run_curriculum,
    train_single_stage,
)
from .dqn import DqnConfig
from .errors import IntegrityError, SkillArenaError, UsageError
from .evaluate import (
    EvalSpec,
    dodge_diagnostics,
    e2e_baseline,
    eval_run,
    transfer_eval,
    write_report,
)
from .rewards import RewardWeights
from .trajectory import replay_file

PROG = "skillarena"


class _Parser(argparse.ArgumentParser):
    """Argparse that reports problems through the package error type."""

    def error(self, message):
        raise UsageError(message)


def _skill(name: str) -> SkillId:
    try:
        return SkillId(name.strip().lower())
    except ValueError:
        raise UsageError(f"unknown skill {name!r}; expected one of "
                         f"{[s.value for s in SkillId]}") from None


def _skill_list(names: str) -> tuple[SkillId, ...]:
    return tuple(_skill(n) for n in names.split(",") if n.strip())


def _add_common(parser: argparse.ArgumentParser, *flags: str) -> None:
    if "config" in flags:
        parser.add_argument("--config", help="key=value config file")
    if "seed" in flags:
        parser.add_argument("--seed", type=int, default=0, help="run seed")
    if "out" in flags:
        parser.add_argument("--out", help="output directory")
    if "load" in flags:
        parser.add_argument("--load", help="existing run directory")
    if "episodes" in flags:
        parser.add_argument("--episodes", type=int, default=25,
                            help="evaluation episode count")
    if "phase" in flags:
        parser.add_argument("--phase", type=int, choices=(1, 2), default=None,
                            help="boss phase")
    if "spawn" in flags:
        parser.add_argument("--spawn", choices=SPAWN_MODES, default=None,
                            help="player spawn placement")
    if "steps" in flags:
        parser.add_argument("--steps", type=int, default=None,
                            help="decision-step budget override")
    if "metrics-format" in flags:
        parser.add_argument("--metrics-format", choices=("csv", "json"),
                            default="csv", help="report file format")
    if "jobs" in flags:
        parser.add_argument(
            "--jobs", type=int,
            default=int(os.environ.get("SKILLARENA_JOBS", "1")),
            help="parallel evaluation workers",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="skill-graph boss-fight laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one skill stage")
    p.add_argument("--skill", required=True, type=_skill)
    _add_common(p, "config", "seed", "out", "load", "steps", "phase", "spawn")

    p = sub.add_parser("curriculum", help="train all five skills in order")
    _add_common(p, "config", "seed", "out")

    p = sub.add_parser("finetune", help="adapt dodge and ha to phase 2")
    p.add_argument("--skills", type=_skill_list, default=(SkillId.DODGE, SkillId.HA))
    _add_common(p, "config", "seed", "out", "load", "steps")

    p = sub.add_parser("eval", help="score a trained run's composed policy")
    _add_common(p, "config", "seed", "out", "load", "episodes", "phase",
                "spawn", "metrics-format", "jobs")

    p = sub.add_parser("ablate", help="score with chosen skills randomized")
    p.add_argument("--randomize", type=_skill_list, default=(),
                   help="comma-separated skills to replace with uniform random")
    _add_common(p, "config", "seed", "out", "load", "episodes", "phase",
                "spawn", "metrics-format", "jobs")

    p = sub.add_parser("transfer", help="phase-2 zero-shot and fine-tuned reports")
    _add_common(p, "config", "seed", "out", "load", "episodes",
                "metrics-format", "jobs")

    p = sub.add_parser("e2e-baseline", help="train the flat 16-action baseline")
    _add_common(p, "config", "seed", "out", "steps")

    p = sub.add_parser("dodge-diag", help="survival check vs random dodging")
    _add_common(p, "config", "seed", "out", "load", "episodes", "jobs")

    p = sub.add_parser("describe-actions", help="print the action vocabulary")

    p = sub.add_parser("describe-env", help="print effective settings")
    _add_common(p, "config")

    p = sub.add_parser("replay", help="verify a trajectory dump bit-exactly")
    p.add_argument("trajectory", help="path to a trajectory CSV")

    return parser


def _mapping(args) -> dict[str, str]:
    if getattr(args, "config", None):
        return load_config_file(args.config)
    return {}


def _out_dir(args, default_name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    base = Path(os.environ.get("SKILLARENA_OUT", "runs"))
    return base / default_name


def _require_load(args) -> Path:
    if not getattr(args, "load", None):
        raise UsageError("this command needs --load pointing at a run directory")
    return Path(args.load)


def _print(entries: dict[str, object]) -> None:
    for key in sorted(entries):
        print(f"{key} = {entries[key]}")


def cmd_train(args) -> int:
    mapping = _mapping(args)
    out = _out_dir(args, f"train-{args.skill.value}-s{args.seed}")
    info = train_single_stage(
        args.skill, out, mapping, seed=args.seed, upstream_dir=args.load,
        budget=args.steps, spawn_mode=args.spawn, phase=args.phase,
    )
    _print(info)
    return 0


def cmd_curriculum(args) -> int:
    mapping = _mapping(args)
    out = _out_dir(args, f"curriculum-s{args.seed}")
    entries = run_curriculum(out, mapping, seed=args.seed)
    print(f"run_dir = {out}")
    _print(entries)
    return 0


def cmd_finetune(args) -> int:
    mapping = _mapping(args)
    run_dir = _require_load(args)
    out = Path(args.out) if args.out else run_dir / "finetune"
    entries = finetune_phase2(
        run_dir, out, mapping, seed=args.seed, budget=args.steps,
        skills=tuple(args.skills),
    )
    print(f"finetune_dir = {out}")
    _print(entries)
    return 0


def _eval_spec(args, mapping) -> EvalSpec:
    plan = plan_from_mapping(mapping)
    return EvalSpec(
        phase=args.phase if args.phase is not None else 1,
        spawn_mode=args.spawn if args.spawn is not None else "mid",
        episodes=args.episodes,
        seed=args.seed,
        horizon=plan.stage(SkillId.HA).horizon,
    )


def _emit_report(args, report, name: str) -> None:
    for line in report.summary_lines():
        print(line)
    if getattr(args, "out", None):
        out = Path(args.out)
        suffix = "json" if args.metrics_format == "json" else "csv"
        write_report(out / f"{name}.{suffix}", report, args.metrics_format)
        print(f"report = {out / f'{name}.{suffix}'}")


def cmd_eval(args) -> int:
    mapping = _mapping(args)
    run_dir = _require_load(args)
    spec = _eval_spec(args, mapping)
    dump = Path(args.out) / "trajectory.csv" if args.out else None
    report = eval_run(run_dir, mapping, spec, jobs=args.jobs, dump_episode0=dump)
    _emit_report(args, report, "eval")
    if dump is not None:
        print(f"trajectory = {dump}")
    return 0


def cmd_ablate(args) -> int:
    mapping = _mapping(args)
    run_dir = _require_load(args)
    spec = _eval_spec(args, mapping)
    report = eval_run(
        run_dir, mapping, spec, randomize=tuple(args.randomize), jobs=args.jobs
    )
    _emit_report(args, report, "ablate")
    return 0


def cmd_transfer(args) -> int:
    mapping = _mapping(args)
    run_dir = _require_load(args)
    out = Path(args.out) if args.out else run_dir / "transfer"
    finetune_dir = run_dir / "finetune"
    if not (finetune_dir / "manifest.txt").exists():
        print("fine-tuned checkpoints missing; running fine-tune first")
        finetune_phase2(run_dir, finetune_dir, mapping, seed=args.seed)
    reports = transfer_eval(
        run_dir, mapping, seed=args.seed, episodes=args.episodes,
        finetune_dir=finetune_dir, jobs=args.jobs,
    )
    out.mkdir(parents=True, exist_ok=True)
    for name, report in reports.items():
        print(f"--- {name} ---")
        for line in report.summary_lines():
            print(line)
        suffix = "json" if args.metrics_format == "json" else "csv"
        write_report(out / f"{name}.{suffix}", report, args.metrics_format)
    print(f"reports_dir = {out}")
    return 0


def cmd_e2e(args) -> int:
    mapping = _mapping(args)
    out = _out_dir(args, f"e2e-s{args.seed}")
    entries = e2e_baseline(out, mapping, seed=args.seed, budget=args.steps)
    print(f"run_dir = {out}")
    _print(entries)
    return 0


def cmd_dodge_diag(args) -> int:
    mapping = _mapping(args)
    run_dir = _require_load(args)
    diag = dodge_diagnostics(
        run_dir, mapping, seed=args.seed, episodes=args.episodes, jobs=args.jobs
    )
    print(f"trained_ep_len = {diag['trained_ep_len']:.2f}")
    print(f"random_ep_len = {diag['random_ep_len']:.2f}")
    print(f"ratio = {diag['ratio']:.3f}")
    curve = diag["curve"]
    if curve:
        print(f"curve_final_ep_len = {curve[-1]['ep_len_mean']:.2f}")
    return 0


def cmd_describe_actions(args) -> int:
    for skill in SKILL_ORDER:
        labels = ACTION_LABELS[skill]
        print(f"{skill.value}: {ACTION_SET_SIZES[skill]} actions")
        for index, label in enumerate(labels):
            hold = hold_duration(skill, index)
            extra = ""
            if skill == SkillId.E2E:
                decoded = decode_e2e(index)
                extra = " -> " + "/".join(decoded.labels())
            print(f"  [{index}] {label} (hold {hold} ticks){extra}")
    return 0


def cmd_describe_env(args) -> int:
    mapping = _mapping(args)
    from .config import arena_config, dqn_kwargs, reward_weights

    arena = arena_config(mapping)
    for f in dataclasses.fields(arena):
        print(f"arena.{f.name} = {getattr(arena, f.name)}")
    weights = reward_weights(mapping)
    for f in dataclasses.fields(RewardWeights):
        print(f"rewards.{f.name} = {getattr(weights, f.name)}")
    overrides = dqn_kwargs(mapping)
    for f in dataclasses.fields(DqnConfig):
        if f.name == "budget":
            continue
        value = overrides.get(f.name, f.default)
        print(f"dqn.{f.name} = {value}")
    plan = plan_from_mapping(mapping)
    for stage in plan.stages:
        key = stage.skill.value
        print(f"plan.{key}_budget = {stage.budget}")
        print(f"plan.{key}_horizon = {stage.horizon}")
        print(f"plan.{key}_spawn = {stage.spawn_mode}")
    print(f"plan.finetune_budget = {plan.finetune_budget}")
    print(f"plan.finetune_spawn = {plan.finetune_spawn}")
    print(f"plan.e2e_budget = {plan.e2e_budget}")
    print(f"plan.e2e_horizon = {plan.e2e_horizon}")
    return 0


def cmd_replay(args) -> int:
    result = replay_file(args.trajectory)
    print(result.summary())
    if not result.ok:
        raise IntegrityError(result.summary())
    return 0


_DISPATCH = {
    "train": cmd_train,
    "curriculum": cmd_curriculum,
    "finetune": cmd_finetune,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "transfer": cmd_transfer,
    "e2e-baseline": cmd_e2e,
    "dodge-diag": cmd_dodge_diag,
    "describe-actions": cmd_describe_actions,
    "describe-env": cmd_describe_env,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except SkillArenaError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
