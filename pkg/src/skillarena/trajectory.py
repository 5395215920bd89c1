"""Per-tick episode dumps and the bit-exact replay audit.

A dump is a CSV with a commented header naming the episode seed and
arena settings, one row per executed tick: the full feature vector, the
five sub-action indices that were in force, a compact event summary,
and the outcome so far. `replay_file` re-simulates the dump from its
header and reports the first tick where any feature fails exact float
equality, which catches both nondeterminism and config drift.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .actions import CompositeAction
from .arena import Arena, ArenaConfig, StepEvents
from .errors import MissingArtifactError, UsageError
from .features import FEATURE_NAMES, STATE_DIM, derive_features

FORMAT_NAME = "skillarena-trajectory-1"
ACTION_COLUMNS = ("act_camera", "act_lock", "act_move", "act_dodge", "act_combat")
COLUMNS = ("tick", *FEATURE_NAMES, *ACTION_COLUMNS, "events", "outcome")

_EVENT_FLAGS = (
    "boss_hit", "player_hit", "healed", "dodge_started", "attack_started",
    "heal_started", "lock_changed",
)


def _event_summary(events: StepEvents) -> str:
    tokens = [name for name in _EVENT_FLAGS if getattr(events, name)]
    if events.boss_damage > 0.0:
        tokens.append(f"boss_damage={events.boss_damage!r}")
    return ";".join(tokens) if tokens else "-"


class TrajectoryRecorder:
    """Collects rows during an episode; pass as `recorder=` to run_episode."""

    def __init__(self, config: ArenaConfig, seed: int):
        self.config = config
        self.seed = int(seed)
        self.rows: list[list[str]] = []

    def __call__(
        self, tick: int, state: np.ndarray, composite: CompositeAction,
        events: StepEvents,
    ) -> None:
        row = [str(tick)]
        row += [repr(float(v)) for v in state]
        row += [
            str(composite.camera), str(composite.lock), str(composite.move),
            str(composite.dodge), str(composite.combat),
        ]
        row.append(_event_summary(events))
        row.append(events.outcome)
        self.rows.append(row)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(f"# format = {FORMAT_NAME}\n")
            fh.write(f"# seed = {self.seed}\n")
            fh.write(f"# phase = {self.config.phase}\n")
            fh.write(f"# spawn_mode = {self.config.spawn_mode}\n")
            fh.write(f"# arena_radius = {self.config.arena_radius!r}\n")
            fh.write(f"# tick_seconds = {self.config.tick_seconds!r}\n")
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            writer.writerows(self.rows)
        return path


def _parse_header(lines: list[str], path: Path) -> dict[str, str]:
    header: dict[str, str] = {}
    for line in lines:
        body = line[1:].strip()
        key, _, value = body.partition("=")
        header[key.strip()] = value.strip()
    if header.get("format") != FORMAT_NAME:
        raise UsageError(f"{path} is not a trajectory dump (missing format header)")
    missing = {"seed", "phase", "spawn_mode", "arena_radius", "tick_seconds"} - set(header)
    if missing:
        raise UsageError(f"{path} header is missing keys: {sorted(missing)}")
    return header


@dataclass
class ReplayResult:
    ok: bool
    ticks_checked: int
    divergence_tick: int | None = None
    column: str | None = None
    message: str = ""

    def summary(self) -> str:
        if self.ok:
            return f"replay ok: {self.ticks_checked} ticks verified"
        return (
            f"replay FAILED at tick {self.divergence_tick} "
            f"column {self.column}: {self.message}"
        )


def replay_file(path: str | Path) -> ReplayResult:
    """Re-simulate a dump and verify every recorded feature bit-exactly."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"trajectory file not found: {path}")
    raw = path.read_text().splitlines()
    comment_lines = [ln for ln in raw if ln.startswith("#")]
    data_lines = [ln for ln in raw if ln and not ln.startswith("#")]
    header = _parse_header(comment_lines, path)
    rows = list(csv.reader(data_lines))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise UsageError(f"{path} has an unexpected column header")
    rows = rows[1:]

    config = ArenaConfig(
        arena_radius=float(header["arena_radius"]),
        tick_seconds=float(header["tick_seconds"]),
        phase=int(header["phase"]),
        spawn_mode=header["spawn_mode"],
        seed=0,
    )
    arena = Arena(config)
    world = arena.reset(seed=int(header["seed"]))

    n_feat = STATE_DIM
    for row_index, row in enumerate(rows):
        if len(row) != len(COLUMNS):
            return ReplayResult(
                ok=False, ticks_checked=row_index, divergence_tick=row_index,
                column="row", message=f"malformed row with {len(row)} columns",
            )
        tick = int(row[0])
        if world.episode_outcome != "ongoing":
            return ReplayResult(
                ok=False, ticks_checked=row_index, divergence_tick=tick,
                column="outcome",
                message="simulation terminated before the dump did",
            )
        composite = CompositeAction(
            camera=int(row[1 + n_feat]),
            lock=int(row[2 + n_feat]),
            move=int(row[3 + n_feat]),
            dodge=int(row[4 + n_feat]),
            combat=int(row[5 + n_feat]),
        )
        events = arena.step(world, composite)
        state = derive_features(world)
        for f in range(n_feat):
            recorded = float(row[1 + f])
            actual = float(state[f])
            if recorded != actual and not (np.isnan(recorded) and np.isnan(actual)):
                hint = ""
                if row_index == 0:
                    hint = " (first tick: header seed or config likely wrong)"
                return ReplayResult(
                    ok=False, ticks_checked=row_index, divergence_tick=tick,
                    column=FEATURE_NAMES[f],
                    message=f"recorded {recorded!r}, resimulated {actual!r}{hint}",
                )
        if row[-1] != events.outcome:
            return ReplayResult(
                ok=False, ticks_checked=row_index, divergence_tick=tick,
                column="outcome",
                message=f"recorded {row[-1]!r}, resimulated {events.outcome!r}",
            )
    return ReplayResult(ok=True, ticks_checked=len(rows))
