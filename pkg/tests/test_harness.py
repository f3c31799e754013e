import csv
import json
import xml.etree.ElementTree as ET

import pytest

from models import ExperimentConfig, Mode, ScheduleOverride
from models.errors import MissingCheckpointError, RejectedInputError
from scheduler.rollout import StepRecord, run_episode
from scheduler.schedules import FullSchedule, RandomSchedule
from numerics import Rng
from surrogate import save_bundle
from harness import run_clone, run_diagnose, run_eval, train_stage, write_timeline_svg
from harness.experiments import SURROGATE_DIR, make_schedule
from harness.phases import expert_phase_similarity
from harness.reports import aggregate, level_histogram, phase_usage, trace_speedup, write_trace_csv
from harness.timeline import SVG_NS
import phasesched

SMALL_PIPELINE = {"tokens": 4, "hidden": 8, "depth": 3, "refinement_steps": 3, "head_hidden": 8}


def tiny_config(out, **overrides):
    values = {
        "output_dir": str(out),
        "eval_seeds": [1000, 1001, 1002],
        "diagnose_seeds": [1000],
        "pipeline": SMALL_PIPELINE,
        "clone": {"episodes": 2, "epochs": 2, "batch_size": 64},
        "ppo": {"hidden": [8, 8], "episodes_per_update": 1, "updates": 1, "minibatch_size": 64,
                "epochs": 1, "divergence_patience": 50},
    }
    values.update(overrides)
    return ExperimentConfig.model_validate(values)


def rects_with(root, attribute):
    return [r for r in root.iter(f"{{{SVG_NS}}}rect") if attribute in r.attrib]


# --- Timeline ---

def test_all_full_timeline_has_one_band_per_row(tmp_path, small_weights):
    result = run_episode(0, FullSchedule(), small_weights, max_steps=25)
    path = write_timeline_svg(tmp_path / "timeline.svg", result.records, title="full")
    root = ET.parse(path).getroot()
    bands = rects_with(root, "data-level")
    assert len(bands) == 2
    assert all(b.get("data-level") == "0" for b in bands)
    series = {p.get("data-series") for p in root.iter(f"{{{SVG_NS}}}polyline")}
    assert series == {"rho", "v_grip", "v_trans", "v_rot"}


def test_timeline_bands_follow_level_changes(tmp_path, small_weights):
    result = run_episode(1, RandomSchedule(Rng(2)), small_weights, max_steps=40)
    root = ET.parse(write_timeline_svg(tmp_path / "t.svg", result.records)).getroot()
    backbone = [r.backbone for r in result.records]
    runs = 1 + sum(a != b for a, b in zip(backbone, backbone[1:]))
    head = [r.head for r in result.records]
    runs += 1 + sum(a != b for a, b in zip(head, head[1:]))
    assert len(rects_with(root, "data-level")) == runs


# --- Reports ---

def test_aggregate_matches_trace_recomputation(tmp_path, small_weights):
    results = [run_episode(s, RandomSchedule(Rng.for_stream(s, "random-schedule")), small_weights, max_steps=30)
               for s in (10, 11)]
    summary = aggregate(results)

    rows = []
    for result in results:
        path = write_trace_csv(tmp_path / f"trace_{result.seed}.csv", result.records)
        with open(path, newline='') as f:
            rows.extend(csv.DictReader(f))
    costs = [float(r["step_cost"]) for r in rows]
    assert summary["steps"] == len(rows) == 60
    assert summary["speedup"] == len(costs) / sum(costs)
    assert summary["per_level_histogram"]["backbone"] == [
        sum(int(r["backbone"]) == level for r in rows) for level in range(5)]
    assert summary["speedup"] == pytest.approx(results[0].ledger.merge(results[1].ledger).speedup(), rel=1e-12)


def test_aggregate_charges_scheduler_overhead(small_weights):
    results = [run_episode(s, FullSchedule(), small_weights, max_steps=20) for s in (12, 13)]
    merged = results[0].ledger.merge(results[1].ledger)
    assert aggregate(results)["speedup_with_scheduler"] == 1.0
    charged = aggregate(results, scheduler_flops=5000)["speedup_with_scheduler"]
    assert charged == pytest.approx(merged.speedup_with_overhead(5000), rel=1e-12)
    assert charged < 1.0


def test_trace_speedup_matches_ledger(small_weights):
    result = run_episode(3, RandomSchedule(Rng(9)), small_weights, max_steps=40)
    assert trace_speedup(result.records) == pytest.approx(result.speedup, rel=1e-12)
    hist = level_histogram(result.records)
    assert sum(hist["backbone"]) == sum(hist["head"]) == 40


def record(step, rho, backbone):
    return StepRecord(
        step=step, rho=rho, probed=True, v_grip=0.0, v_trans=0.0, v_rot=0.0, progress=step / 200,
        requested_backbone=backbone, requested_head=0, backbone=backbone, head=0,
        teacher_backbone=backbone, teacher_head=0, forced=False, skip_remaining=0, step_cost=1.0,
        reward_stage1=0.0, reward_stage2=0.0, done=False, success=False,
    )


def test_phase_usage_splits_on_the_rho_floor():
    records = [record(0, 1.0, 0), record(1, 0.99, 3), record(2, 0.8, 0), record(3, 0.85, 1), record(4, 0.95, 2)]
    usage = phase_usage(records, 0.9)
    assert usage["low_rho_steps"] == 2
    assert usage["low_rho_backbone_full_rate"] == 0.5
    assert usage["backbone_full_rate"] == 0.4
    assert phase_usage(records, 0.5)["low_rho_backbone_full_rate"] is None


def test_policies_need_a_checkpoint():
    with pytest.raises(RejectedInputError):
        make_schedule(ScheduleOverride.STAGE2, 0, ExperimentConfig().teacher)
    assert make_schedule(ScheduleOverride.FULL, 0, ExperimentConfig().teacher).name == "full"


# --- Modes ---

def test_eval_reports_are_reproducible(tmp_path, small_weights):
    reports = []
    for run in ("a", "b"):
        out = tmp_path / run
        save_bundle(out / SURROGATE_DIR, small_weights)
        for override in ("full", "threshold", "random"):
            run_eval(tiny_config(out, override=override))
            reports.append((override, (out / "report.json").read_text()))
            assert (out / "trace_1002.csv").exists()
    by_policy = {}
    for override, text in reports:
        by_policy.setdefault(override, []).append(text)
    assert all(a == b for a, b in by_policy.values())

    full = json.loads(by_policy["full"][0])
    assert full["aggregate"]["speedup"] == 1.0
    assert full["aggregate"]["speedup_with_scheduler"] == 1.0
    assert [row["seed"] for row in full["per_seed"]] == [1000, 1001, 1002]


def test_eval_without_checkpoint(tmp_path, small_weights):
    save_bundle(tmp_path / SURROGATE_DIR, small_weights)
    with pytest.raises(MissingCheckpointError):
        run_eval(tiny_config(tmp_path, override="stage2"))
    with pytest.raises(MissingCheckpointError):
        run_eval(tiny_config(tmp_path / "empty", override="full"))


def test_threshold_diagnose_runs_full_backbone_below_the_floor(tmp_path, small_weights):
    save_bundle(tmp_path / SURROGATE_DIR, small_weights)
    config = tiny_config(tmp_path, mode="diagnose", override="threshold", diagnose_seeds=[1000, 1001, 1002])
    report = run_diagnose(config)
    assert json.loads((tmp_path / "diagnose.json").read_text()) == report
    for episode in report["episodes"]:
        assert episode["low_rho_backbone_full_rate"] in (None, 1.0)
        if episode["low_rho_steps"]:
            assert episode["low_rho_backbone_full_rate"] >= episode["backbone_full_rate"]
        similarity = episode["expert_similarity"]
        assert similarity["seed"] == episode["seed"] and similarity["transport_pairs"] > 0


def test_expert_transport_is_more_self_similar_than_the_grasp(default_weights):
    rows = [expert_phase_similarity(default_weights, seed) for seed in range(5)]
    assert all(r["grasp_transition_cka_first"] is not None for r in rows)
    transport = sum(r["transport_cka_first"] for r in rows) / len(rows)
    transition = sum(r["grasp_transition_cka_first"] for r in rows) / len(rows)
    assert transport > transition
    assert all(0.0 <= r["transport_cka_last"] <= 1.0 for r in rows)


def test_clone_train_eval_diagnose_pipeline(tmp_path):
    config = tiny_config(tmp_path, mode=Mode.CLONE.value, eval_seeds=[1000])
    report = run_clone(config)
    assert (tmp_path / SURROGATE_DIR).exists()
    assert report["baseline"]["speedup"] == 1.0

    train_stage(config, 1)
    train_stage(config, 2)
    assert (tmp_path / "stage2.json").exists()
    assert (tmp_path / "training_log_stage2.csv").exists()

    evaluated = run_eval(tiny_config(tmp_path, eval_seeds=[1000]))
    assert evaluated["policy"] == "stage2"

    diagnosis = run_diagnose(tiny_config(tmp_path, mode="diagnose", override="threshold"))
    episode = diagnosis["episodes"][0]
    assert (tmp_path / episode["trace"]).exists()
    ET.parse(tmp_path / episode["timeline"])


# --- CLI ---

def test_cli_rejects_invalid_config(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"workers": 0}))
    out = tmp_path / "out"
    assert phasesched.main(["eval", "--config", str(config), "--out", str(out)]) == phasesched.EXIT_REJECTED_INPUT
    payload = json.loads((out / "error.json").read_text())
    assert payload["error"] == "ValidationError" and payload["mode"] == "eval"
    assert json.loads(capsys.readouterr().out) == payload


def test_cli_reports_missing_checkpoint(tmp_path, small_weights, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"pipeline": SMALL_PIPELINE, "eval_seeds": [1000]}))
    save_bundle(tmp_path / SURROGATE_DIR, small_weights)
    code = phasesched.main(["eval", "--config", str(config), "--out", str(tmp_path), "--override", "stage1"])
    assert code == phasesched.EXIT_REJECTED_INPUT
    assert json.loads(capsys.readouterr().out)["error"] == "MissingCheckpointError"


def test_cli_missing_config_file(tmp_path, capsys):
    code = phasesched.main(["clone", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == phasesched.EXIT_REJECTED_INPUT
    assert (tmp_path / "error.json").exists()


def test_cli_flags_reach_the_config(tmp_path):
    args = phasesched.build_parser().parse_args(
        ["eval", "--workers", "3", "--seed", "5", "--out", str(tmp_path), "--override", "threshold"])
    config = phasesched.load_config(args)
    assert config.workers == 3 and config.seed == 5
    assert config.override == ScheduleOverride.THRESHOLD and config.mode == Mode.EVAL


def test_cli_unexpected_error_still_reports(tmp_path, capsys, monkeypatch):
    def broken(config):
        raise OSError("disk full")

    monkeypatch.setattr(phasesched, "dispatch", broken)
    code = phasesched.main(["eval", "--out", str(tmp_path)])
    assert code == phasesched.EXIT_FAILURE
    payload = json.loads((tmp_path / "error.json").read_text())
    assert payload == {"error": "OSError", "message": "disk full", "mode": "eval"}
    assert json.loads(capsys.readouterr().out) == payload
