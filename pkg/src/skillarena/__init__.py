"""Deterministic boss-fight arena plus a modular skill-graph DQN stack.

The package splits into three layers: a fixed-tick melee simulator
(`arena`, `features`, `rewards`), a cadence-aware execution model that
lets five specialist policies share one controller (`actions`,
`cadence`), and a from-scratch value-learning pipeline with curriculum,
fine-tuning, evaluation, and replay tooling on top.
"""
from .actions import SKILL_ORDER, CompositeAction, SkillId, compose, decode_e2e
from .arena import Arena, ArenaConfig
from .cadence import SkillRuntime, run_episode
from .dqn import DqnAgent, DqnConfig, FrozenSkill, train_skill
from .errors import (
    IntegrityError,
    MissingArtifactError,
    NumericalError,
    SkillArenaError,
    UsageError,
)
from .features import STATE_DIM, derive_features, project
from .rewards import DEFAULT_WEIGHTS, RewardWeights

__version__ = "0.1.0"

__all__ = [
    "Arena",
    "ArenaConfig",
    "CompositeAction",
    "DEFAULT_WEIGHTS",
    "DqnAgent",
    "DqnConfig",
    "FrozenSkill",
    "IntegrityError",
    "MissingArtifactError",
    "NumericalError",
    "RewardWeights",
    "SKILL_ORDER",
    "STATE_DIM",
    "SkillArenaError",
    "SkillId",
    "SkillRuntime",
    "UsageError",
    "compose",
    "decode_e2e",
    "derive_features",
    "project",
    "run_episode",
    "train_skill",
    "__version__",
]
