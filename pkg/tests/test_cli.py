import json
from pathlib import Path

import pytest

from arglinker.cli import main
from arglinker.corpus import load_corpus, save_corpus

from helpers import essay_from_heads

DATA = Path(__file__).parent / "data"

IN_HEADS = [
    [1, 1, 1, 2, 2],
    [0, 0, 1, 1, 0, 5],
    [2, 2, 2, 2],
    [0, 0, 1, 2, 3],
    [1, 1, 1, 2, 3, 1],
    [0, 0, 0, 1, 1],
    [1, 1, 1, 1],
    [0, 0, 1, 1, 2, 2, 0],
]
OUT_HEADS = [
    [0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 17],  # 18 sentences
    [0, 0, 0, 0, 4, 5],  # two non-ACs
    [2, 2, 2],
]


@pytest.fixture
def corpora(tmp_path):
    in_path = tmp_path / "in.jsonl"
    out_path = tmp_path / "out.jsonl"
    save_corpus([essay_from_heads(f"in-{k}", h) for k, h in enumerate(IN_HEADS)],
                in_path)
    save_corpus([essay_from_heads(f"out-{k}", h) for k, h in enumerate(OUT_HEADS)],
                out_path)
    return in_path, out_path


@pytest.fixture
def experiment_config(tmp_path, corpora):
    in_path, out_path = corpora
    config = {
        "in_corpus": str(in_path),
        "out_corpus": str(out_path),
        "setting": "I",
        "model": {
            "input_dim": 10, "dense1_units": 10, "lstm_units": 5,
            "lstm_stacks": 2, "proj_units": 6, "dropout_rate": 0.1,
            "use_spos": True, "use_qact_head": True, "use_nd_head": True,
            "margin": 1.0, "seed": 3,
        },
        "embeddings": {"mode": "pseudo", "dim": 10, "seed": 77},
        "split_fraction": 0.75,
        "split_seed": 5,
        "epochs": 2,
        "lr": 0.003,
        "val_fraction": 0.0,
        "runs": 2,
        "out_dir": str(tmp_path / "runs"),
    }
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(config, indent=2))
    return path


# ---------------------------------------------------------------- convert

def test_convert_multi_ac_fixture(tmp_path, capsys):
    out = tmp_path / "converted.jsonl"
    assert main(["convert", "--in", str(DATA / "segments_multi_ac.jsonl"),
                 "--out", str(out)]) == 0
    essays = load_corpus(out)
    assert essays[0].n == 3
    assert essays[0].gold.head == (1, 1, 1)


def test_convert_byte_stable(tmp_path):
    out1 = tmp_path / "a.jsonl"
    out2 = tmp_path / "b.jsonl"
    main(["convert", "--in", str(DATA / "segments_multi_ac.jsonl"), "--out", str(out1)])
    main(["convert", "--in", str(DATA / "segments_multi_ac.jsonl"), "--out", str(out2)])
    assert out1.read_bytes() == out2.read_bytes()


def test_convert_reports_corrupt_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    lines = [json.dumps({"essay_id": f"x{k}", "sentences": ["a b."],
                         "segments": [{"sent": 0, "start": 0, "end": 4,
                                       "head_segment": None}]})
             for k in range(6)]
    lines.append("{broken")
    bad.write_text("\n".join(lines) + "\n")
    code = main(["convert", "--in", str(bad), "--out", str(tmp_path / "o.jsonl")])
    captured = capsys.readouterr()
    assert code != 0
    assert ":7" in captured.err


# ---------------------------------------------------------------- sample

def test_sample_filters_pool(tmp_path, corpora, capsys):
    _, out_path = corpora
    filtered = tmp_path / "filtered.jsonl"
    assert main(["sample", "--in", str(out_path), "--out", str(filtered),
                 "--policy.max-sentences", "17", "--policy.max-non-acs", "2"]) == 0
    kept = load_corpus(filtered)
    assert [e.essay_id for e in kept] == ["out-0", "out-2", "out-3"]


# ---------------------------------------------------------------- experiment

def test_experiment_two_runs_summary(tmp_path, experiment_config, capsys):
    assert main(["experiment", "--config", str(experiment_config)]) == 0
    runs_root = tmp_path / "runs"
    exp_dirs = list(runs_root.iterdir())
    assert len(exp_dirs) == 1
    summary = json.loads((exp_dirs[0] / "summary.json").read_text())
    assert len(summary["runs"]) == 2
    assert set(summary["mean"]) == {"accuracy", "f1_macro", "mar_dset",
                                    "qact_macro", "avg_depth", "leaf_ratio"}
    csv_lines = (exp_dirs[0] / "summary.csv").read_text().strip().splitlines()
    assert len(csv_lines) == 4  # header + 2 runs + mean
    assert (exp_dirs[0] / "run_00" / "checkpoint.npz").exists()
    assert (exp_dirs[0] / "run_01" / "report.json").exists()


def test_experiment_rerun_byte_identical(tmp_path, experiment_config):
    main(["experiment", "--config", str(experiment_config)])
    exp_dir = next((tmp_path / "runs").iterdir())
    first_summary = (exp_dir / "summary.json").read_bytes()
    first_csv = (exp_dir / "summary.csv").read_bytes()
    main(["experiment", "--config", str(experiment_config)])
    assert (exp_dir / "summary.json").read_bytes() == first_summary
    assert (exp_dir / "summary.csv").read_bytes() == first_csv


def test_experiment_ss_subset_of_pooled(tmp_path, experiment_config):
    assert main(["experiment", "--config", str(experiment_config),
                 "--setting", "SS"]) == 0
    assert main(["experiment", "--config", str(experiment_config),
                 "--setting", "P+I"]) == 0
    summaries = {}
    for exp_dir in (tmp_path / "runs").iterdir():
        summary = json.loads((exp_dir / "summary.json").read_text())
        summaries[summary["setting"]] = summary["train_essays"]
    assert summaries["SS"] <= summaries["P+I"]
    # out-domain pool: 4 essays, one too long and none over the non-AC cap
    assert summaries["P+I"] - summaries["SS"] == 1


def test_experiment_with_baseline_significance(tmp_path, experiment_config):
    main(["experiment", "--config", str(experiment_config)])
    baseline_dir = next((tmp_path / "runs").iterdir())
    assert main(["experiment", "--config", str(experiment_config),
                 "--setting", "SS", "--baseline-dir", str(baseline_dir)]) == 0
    ss_dir = [d for d in (tmp_path / "runs").iterdir() if d != baseline_dir]
    summary = json.loads((ss_dir[0] / "summary.json").read_text())
    table = summary["significance_vs_baseline"]
    assert set(table) >= {"accuracy", "f1_macro", "mar_dset"}
    for cell in table.values():
        assert 0.0 <= cell["p_value"] <= 1.0


# ---------------------------------------------------------------- decode + eval

def test_decode_and_eval_round_trip(tmp_path, corpora, experiment_config, capsys):
    in_path, _ = corpora
    main(["experiment", "--config", str(experiment_config)])
    exp_dir = next((tmp_path / "runs").iterdir())
    checkpoint = exp_dir / "run_00" / "checkpoint.npz"
    predictions = tmp_path / "pred.jsonl"
    assert main(["decode", "--checkpoint", str(checkpoint),
                 "--corpus", str(in_path), "--out", str(predictions),
                 "--pseudo-dim", "10", "--pseudo-seed", "77"]) == 0
    report_dir = tmp_path / "evalout"
    assert main(["eval", "--pred", str(predictions), "--gold", str(in_path),
                 "--out", str(report_dir)]) == 0
    report = json.loads((report_dir / "report.json").read_text())
    assert 0.0 <= report["accuracy"] <= 1.0
    assert (report_dir / "distance_f1.csv").exists()
    assert (report_dir / "depth_f1.csv").exists()


def test_eval_perfect_prediction_scores_one(tmp_path, corpora):
    in_path, _ = corpora
    report_dir = tmp_path / "selfeval"
    assert main(["eval", "--pred", str(in_path), "--gold", str(in_path),
                 "--out", str(report_dir)]) == 0
    report = json.loads((report_dir / "report.json").read_text())
    assert report["accuracy"] == 1.0
    assert report["f1_macro"] == 1.0
    assert report["mar_dset"] == 1.0


# ---------------------------------------------------------------- report

def test_report_tables(tmp_path, experiment_config):
    main(["experiment", "--config", str(experiment_config)])
    exp_dir = next((tmp_path / "runs").iterdir())
    tables = tmp_path / "tables"
    assert main(["report", str(exp_dir), "--out", str(tables)]) == 0
    links = (tables / "links.csv").read_text().strip().splitlines()
    assert links[0].startswith("model,accuracy,f1_macro,mar_dset")
    assert len(links) == 2
    for name in ("qact.csv", "shape.csv", "distance_f1.csv", "depth_f1.csv"):
        assert (tables / name).exists()


def test_report_with_baseline_significance_column(tmp_path, experiment_config):
    main(["experiment", "--config", str(experiment_config)])
    baseline = next((tmp_path / "runs").iterdir())
    main(["experiment", "--config", str(experiment_config), "--setting", "SS"])
    dirs = sorted((tmp_path / "runs").iterdir())
    tables = tmp_path / "tables2"
    assert main(["report", *map(str, dirs), "--out", str(tables),
                 "--baseline-dir", str(baseline)]) == 0
    lines = (tables / "links.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    p_col = header.index("p_f1_macro")
    for line in lines[1:]:
        cell = line.split(",")[p_col]
        assert cell == "" or 0.0 <= float(cell) <= 1.0


def test_report_empty_dir_fails(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main(["report", str(empty), "--out", str(tmp_path / "t")])
    assert code != 0
    assert "summary.json" in capsys.readouterr().err


def test_train_command_single_run(tmp_path, experiment_config):
    assert main(["train", "--config", str(experiment_config),
                 "--seed", "99", "--out", str(tmp_path / "single")]) == 0
    exp_dir = next((tmp_path / "single").iterdir())
    summary = json.loads((exp_dir / "summary.json").read_text())
    assert len(summary["runs"]) == 1
    assert summary["runs"][0]["seed"] == 99
    assert (exp_dir / "run_00" / "train_log.csv").exists()
