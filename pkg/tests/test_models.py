import json

import pytest
from pydantic import ValidationError

from models import FULL_COMPUTE, JOINT_ACTIONS, ComputeAction, ExperimentConfig, PipelineConfig
from models.errors import RejectedInputError


@pytest.mark.parametrize("index", range(JOINT_ACTIONS))
def test_joint_index_layout(index):
    action = ComputeAction.from_index(index)
    assert action.index == index
    assert index == 3 * action.backbone + action.head


def test_compute_action_bounds():
    assert FULL_COMPUTE == ComputeAction(backbone=0, head=0)
    with pytest.raises(ValidationError):
        ComputeAction(backbone=5, head=0)
    with pytest.raises(ValidationError):
        ComputeAction(backbone=0, head=3)
    with pytest.raises(ValueError):
        ComputeAction.from_index(JOINT_ACTIONS)


def test_pipeline_shape_limits():
    with pytest.raises(ValidationError):
        PipelineConfig(depth=2)
    with pytest.raises(ValidationError):
        PipelineConfig(refinement_steps=2)


def test_empty_config_is_valid():
    config = ExperimentConfig.model_validate({})
    assert config.eval_seeds == list(range(1000, 1100))


def test_seed_sets_must_be_distinct_and_nonempty():
    with pytest.raises(ValidationError):
        ExperimentConfig(eval_seeds=[])
    with pytest.raises(ValidationError):
        ExperimentConfig(eval_seeds=[1, 1])


def test_config_hash_ignores_output_location():
    a = ExperimentConfig(output_dir="runs/a", workers=1)
    b = ExperimentConfig(output_dir="runs/b", workers=4)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != ExperimentConfig(seed=1).config_hash()


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 3, "pipeline": {"hidden": 16}}))
    config = ExperimentConfig.from_file(path)
    assert config.seed == 3 and config.pipeline.hidden == 16


def test_config_file_overrides_win(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 3, "workers": 2, "output_dir": "runs/file"}))
    config = ExperimentConfig.from_file(path, seed=9, output_dir="runs/flag")
    assert config.seed == 9 and str(config.output_dir) == "runs/flag"
    assert config.workers == 2


def test_config_file_must_exist_and_hold_an_object(tmp_path):
    with pytest.raises(RejectedInputError):
        ExperimentConfig.from_file(tmp_path / "missing.json")
    path = tmp_path / "list.json"
    path.write_text(json.dumps([1, 2]))
    with pytest.raises(RejectedInputError):
        ExperimentConfig.from_file(path)
