import json
from pathlib import Path

import pytest

from tvrec.cli import EngineConfig, load_config, main

SYNTH_CFG = {
    "n_users": 25,
    "n_channels": 4,
    "n_topics": 5,
    "weeks_train": 2,
    "weeks_test": 1,
    "rng_seed": 3,
}
T_SPLIT = 1_554_076_800 + 2 * 604_800


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One synth dataset plus an engine config file."""
    root = tmp_path_factory.mktemp("ws")
    data = root / "data"
    synth_cfg = root / "synth.json"
    synth_cfg.write_text(json.dumps(SYNTH_CFG))
    assert run(["synth", "--config", synth_cfg, "--out-dir", data]) == 0
    engine_cfg = root / "engine.json"
    engine_cfg.write_text(
        json.dumps(
            {
                "preprocessing": {"t_split": T_SPLIT, "train_days": 14, "test_days": 7},
                "ranking": {"k": 10},
                "evaluation": {"cutoffs": [5, 10]},
                "paths": {
                    "logs": str(data / "logs.jsonl"),
                    "programs": str(data / "programs.jsonl"),
                    "out_dir": str(root / "out"),
                },
                "seed": 7,
            }
        )
    )
    return root, engine_cfg


def test_synth_writes_dataset_with_manifest(workspace):
    root, _ = workspace
    data = root / "data"
    assert (data / "logs.jsonl").exists()
    assert (data / "programs.jsonl").exists()
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["counts"]["accounts"] == 25
    assert manifest["config_hash"]


def test_prep_build_recommend_evaluate_round_trip(workspace, capsys):
    root, cfg = workspace
    out = root / "out"
    assert run(["prep", "--config", cfg]) == 0
    summary = json.loads((out / "prep_summary.json").read_text())
    assert {"d_train", "d_test", "i_train", "i_test", "users", "channels"} <= set(summary["summary"])
    assert summary["provenance"]["seed"] == 7
    truth_lines = (out / "truth.jsonl").read_text().splitlines()
    assert "_meta" in truth_lines[0]

    assert run(["build", "--config", cfg]) == 0
    assert (out / "model.pkl").exists()
    assert json.loads((out / "vocab.json").read_text())["vocabulary"]["tokens"]

    for method in ("behavior", "preference", "two-stage", "rrf", "rrf-weighted"):
        assert run(["recommend", "--config", cfg, "--method", method]) == 0
        rec_path = out / f"recs_{method}.jsonl"
        rows = [json.loads(line) for line in rec_path.read_text().splitlines()]
        assert "_meta" in rows[0]
        body = rows[1:]
        assert body and all(len(r["items"]) == len(r["scores"]) <= 10 for r in body)
        assert all(len(set(r["items"])) == len(r["items"]) for r in body)
        assert run(["evaluate", "--config", cfg, "--method", method]) == 0
        report = json.loads((out / f"metrics_{method}.json").read_text())["report"]
        assert set(report["ndcg"]) == {"5", "10"}
    capsys.readouterr()


def test_recommend_is_deterministic_across_runs(workspace):
    root, cfg = workspace
    out = root / "out"
    a = root / "recs_a.jsonl"
    b = root / "recs_b.jsonl"
    assert run(["recommend", "--config", cfg, "--method", "two-stage", "--out", a]) == 0
    assert run(["recommend", "--config", cfg, "--method", "two-stage", "--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_bench_reports_seconds_per_user(workspace):
    root, cfg = workspace
    assert run(["bench", "--config", cfg, "--method", "behavior,two-stage",
                "--users-sample", 5, "--reps", 2]) == 0
    doc = json.loads((root / "out" / "bench.json").read_text())
    assert set(doc["seconds_per_user"]) == {"behavior", "two-stage"}
    assert all(v > 0 for v in doc["seconds_per_user"].values())


def test_tune_writes_selected_hyperparameters(workspace):
    root, cfg = workspace
    assert run(["tune", "--config", cfg, "--dev-frac", 0.3,
                "--eta-grid", "40,60", "--xi-grid", "0:1:0.5", "--cutoff", 10]) == 0
    doc = json.loads((root / "out" / "tuned.json").read_text())
    assert doc["eta"] in (40, 60)
    assert doc["xi"] in (0.0, 0.5, 1.0)


def test_inspect_user_dumps_behavior_matrix(workspace, capsys):
    root, cfg = workspace
    truth_rows = [json.loads(l) for l in (root / "out" / "truth.jsonl").read_text().splitlines()[1:]]
    user = truth_rows[0]["user"]
    assert run(["inspect-user", "--config", cfg, "--user", user]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out.strip().splitlines()[-1])
    assert doc["user"] == user
    assert doc["entries"]
    assert abs(sum(p for _, _, p in doc["entries"]) - 1.0) < 1e-9


def test_missing_input_exits_with_data_error(tmp_path):
    assert run(["prep", "--logs", tmp_path / "nope.jsonl",
                "--programs", tmp_path / "nope2.jsonl", "--t-split", T_SPLIT,
                "--out-dir", tmp_path]) == 3


def test_bad_config_value_exits_with_usage_error(workspace, tmp_path):
    root, cfg = workspace
    # k below the largest cutoff violates the config invariant
    assert run(["recommend", "--config", cfg, "--method", "behavior", "--k", 3]) == 2


def test_unknown_config_key_is_usage_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"ranking": {"strength": 11}}))
    assert run(["prep", "--config", bad]) == 2


def test_unknown_method_rejected_by_parser(workspace, capsys):
    root, cfg = workspace
    with pytest.raises(SystemExit) as err:
        run(["recommend", "--config", cfg, "--method", "magic"])
    assert err.value.code == 2
    capsys.readouterr()


def test_load_config_defaults_and_overrides(tmp_path):
    cfg = load_config(None, {"t_split": 123, "k": 40})
    assert cfg.k == 40 and cfg.t_split == 123
    assert cfg.n_slots == 672
    assert cfg.min_duration_secs == 900
    assert cfg.train_days == 90 and cfg.test_days == 7
    assert cfg.cutoffs == (10, 20, 30)
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"grid": {"n_slots": 168}, "seed": 5}))
    cfg2 = load_config(str(path), {"seed": None})
    assert cfg2.n_slots == 168 and cfg2.seed == 5


def test_engine_config_hash_is_stable_and_sensitive():
    a = EngineConfig(t_split=1)
    b = EngineConfig(t_split=1)
    c = EngineConfig(t_split=2)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
