"""Shared fixtures: toy-scale training configs and a cached tiny run."""
import pytest

from skillarena.curriculum import finetune_phase2, run_curriculum

# Small enough that a full pipeline runs in a couple of seconds while still
# exercising gradient steps, target updates, and evaluation marks.
TOY_MAPPING = {
    "dqn.batch_size": 32,
    "dqn.warmup": 64,
    "dqn.eval_every": 300,
    "dqn.eval_episodes": 2,
    "dqn.target_update": 200,
    "plan.cam_budget": 600,
    "plan.lock_budget": 600,
    "plan.move_budget": 600,
    "plan.dodge_budget": 600,
    "plan.ha_budget": 600,
    "plan.cam_horizon": 32,
    "plan.lock_horizon": 32,
    "plan.move_horizon": 32,
    "plan.dodge_horizon": 64,
    "plan.ha_horizon": 64,
    "plan.finetune_budget": 400,
    "plan.e2e_budget": 600,
    "plan.e2e_horizon": 64,
}


@pytest.fixture()
def toy_mapping():
    return dict(TOY_MAPPING)


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory):
    """One tiny curriculum plus fine-tune, shared by read-only tests."""
    out = tmp_path_factory.mktemp("toy_run")
    run_curriculum(out, dict(TOY_MAPPING), seed=11)
    finetune_phase2(out, mapping=dict(TOY_MAPPING), seed=11)
    return out
