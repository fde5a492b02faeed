"""Command-line behaviors: determinism, pipeline smoke, exit codes."""

import json

import pytest

from fedsemrec.cli import run_cli

TINY = ["--set", "pretrain_rounds=1", "--set", "batch_size=16",
        "--set", "k_clusters=4", "--set", "n_layers=2", "--set", "d_v=8",
        "--set", "m_max=8", "--set", "n_filters=1", "--set", "n_blocks=1",
        "--set", "sigma=0", "--set", "finetune_epochs=2", "--set", "patience=2"]

SYNTH = ["synth", "--items", "24", "--users", "16", "--topics", "4",
         "--d-w", "6", "--layers", "2", "--min-len", "5", "--max-len", "8"]


def _records(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def _synth(tmp_path, seed=7, name="data"):
    out = tmp_path / name
    code = run_cli(SYNTH + ["--out-dir", str(out), "--seed", str(seed),
                            "--metrics-out", str(tmp_path / f"{name}.jsonl")])
    assert code == 0
    return out


def test_synth_same_seed_is_byte_identical(tmp_path):
    first = _synth(tmp_path, seed=7, name="one")
    second = _synth(tmp_path, seed=7, name="two")
    for name in ["sequences_A.tsv", "sequences_B.tsv", "bank_A.mlse",
                 "bank_B.mlse", "topics_A.tsv", "topics_B.tsv"]:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    third = _synth(tmp_path, seed=8, name="three")
    assert (first / "bank_A.mlse").read_bytes() != \
        (third / "bank_A.mlse").read_bytes()


def test_full_pipeline_emits_metrics_and_exits_zero(tmp_path):
    data = _synth(tmp_path)
    ckpt_dir = tmp_path / "ckpt"
    code = run_cli(["pretrain",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--bank", str(data / "bank_B.mlse"),
                    "--sequences", str(data / "sequences_B.tsv"),
                    "--domains", "A,B", "--out-dir", str(ckpt_dir),
                    "--transcript", str(tmp_path / "transcript.jsonl"),
                    "--metrics-out", str(tmp_path / "pre.jsonl")] + TINY)
    assert code == 0
    assert (ckpt_dir / "A.ckpt").exists() and (ckpt_dir / "B.ckpt").exists()
    pre = _records(tmp_path / "pre.jsonl")
    assert all(r["phase"] == "pretrain" and r["metric"] == "loss" for r in pre)
    assert {r["domain"] for r in pre} == {"A", "B"}
    transcript = _records(tmp_path / "transcript.jsonl")
    assert [e["kind"] for e in transcript] == ["upload", "upload",
                                               "download", "download"]

    code = run_cli(["finetune",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--checkpoint", str(ckpt_dir / "A.ckpt"),
                    "--out", str(ckpt_dir / "A_ft.ckpt"), "--domain", "A",
                    "--metrics-out", str(tmp_path / "ft.jsonl")] + TINY)
    assert code == 0
    ft = _records(tmp_path / "ft.jsonl")
    assert any(r["metric"] == "best_valid_recall@10" for r in ft)

    code = run_cli(["evaluate",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--checkpoint", str(ckpt_dir / "A_ft.ckpt"), "--domain", "A",
                    "--metrics-out", str(tmp_path / "eval.jsonl")] + TINY)
    assert code == 0
    ev = _records(tmp_path / "eval.jsonl")
    by_metric = {r["metric"]: r["value"] for r in ev}
    assert set(by_metric) == {"recall@10", "recall@50", "ndcg@10", "ndcg@50",
                              "n_users"}
    assert by_metric["recall@50"] >= by_metric["recall@10"]
    assert by_metric["n_users"] == 16

    code = run_cli(["inspect-clusters", "--checkpoint", str(ckpt_dir / "A.ckpt"),
                    "--metrics-out", str(tmp_path / "clusters.jsonl")])
    assert code == 0
    ins = {r["metric"]: r["value"] for r in _records(tmp_path / "clusters.jsonl")}
    assert ins["n_items"] == 24 and 1 <= ins["n_centroids"] <= 4


def test_evaluate_without_checkpoint_is_a_usage_error(tmp_path, capsys):
    data = _synth(tmp_path)
    code = run_cli(["evaluate",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--checkpoint", str(tmp_path / "missing.ckpt")] + TINY)
    assert code == 2
    assert "missing.ckpt" in capsys.readouterr().err


def test_unknown_flag_and_unknown_config_key_exit_two(tmp_path, capsys):
    assert run_cli(["synth", "--no-such-flag", "--out-dir", str(tmp_path)]) == 2
    data = _synth(tmp_path)
    code = run_cli(["pretrain",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--out-dir", str(tmp_path / "ckpt"),
                    "--set", "learning_rate=0.1"])
    assert code == 2
    assert "learning_rate" in capsys.readouterr().err


def test_unknown_config_file_key_exits_two(tmp_path, capsys):
    data = _synth(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("pretrain_rounds = 1\nnum_rounds = 3\n")
    code = run_cli(["pretrain",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--out-dir", str(tmp_path / "ckpt"),
                    "--config", str(cfg)])
    assert code == 2
    assert "num_rounds" in capsys.readouterr().err


def test_ingest_applies_five_core_and_reports(tmp_path):
    raw = tmp_path / "raw.tsv"
    lines = [f"u{u}\t" + ",".join(f"i{(u + k) % 6}" for k in range(6))
             for u in range(6)]
    lines.append("light\ti0,i1")
    raw.write_text("".join(line + "\n" for line in lines))
    out_seq = tmp_path / "dense.tsv"
    out_items = tmp_path / "items.tsv"
    code = run_cli(["ingest", "--sequences", str(raw),
                    "--out-sequences", str(out_seq),
                    "--out-items", str(out_items), "--domain", "shop",
                    "--metrics-out", str(tmp_path / "ingest.jsonl")])
    assert code == 0
    stats = {r["metric"]: r["value"] for r in _records(tmp_path / "ingest.jsonl")}
    assert stats["n_users"] == 6 and stats["n_raw_users"] == 7
    assert stats["n_items"] == 6
    assert len(out_seq.read_text().splitlines()) == 6
    assert len(out_items.read_text().splitlines()) == 6


def test_ingest_empty_result_is_a_runtime_failure(tmp_path, capsys):
    raw = tmp_path / "raw.tsv"
    raw.write_text("u0\ti0,i1\n")
    code = run_cli(["ingest", "--sequences", str(raw),
                    "--out-sequences", str(tmp_path / "out.tsv")])
    assert code == 1
    assert "five-core" in capsys.readouterr().err


def test_mismatched_bank_and_sequences_counts_exit_two(tmp_path, capsys):
    data = _synth(tmp_path)
    code = run_cli(["pretrain",
                    "--bank", str(data / "bank_A.mlse"),
                    "--bank", str(data / "bank_B.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--out-dir", str(tmp_path / "ckpt")] + TINY)
    assert code == 2


def test_checkpoint_config_shape_mismatch_exits_two(tmp_path, capsys):
    data = _synth(tmp_path)
    ckpt_dir = tmp_path / "ckpt"
    assert run_cli(["pretrain",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--domains", "A", "--out-dir", str(ckpt_dir),
                    "--metrics-out", str(tmp_path / "pre.jsonl")] + TINY) == 0
    wrong = [arg if arg != "d_v=8" else "d_v=16" for arg in TINY]
    code = run_cli(["evaluate",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--checkpoint", str(ckpt_dir / "A.ckpt")] + wrong)
    assert code == 2
    assert "shape" in capsys.readouterr().err


def test_exchange_dir_writes_wire_files(tmp_path):
    data = _synth(tmp_path)
    wire = tmp_path / "wire"
    code = run_cli(["pretrain",
                    "--bank", str(data / "bank_A.mlse"),
                    "--sequences", str(data / "sequences_A.tsv"),
                    "--bank", str(data / "bank_B.mlse"),
                    "--sequences", str(data / "sequences_B.tsv"),
                    "--domains", "A,B", "--out-dir", str(tmp_path / "ckpt"),
                    "--exchange-dir", str(wire),
                    "--metrics-out", str(tmp_path / "pre.jsonl")] + TINY)
    assert code == 0
    names = sorted(p.name for p in wire.iterdir())
    assert names == ["round0_download_A.mlse", "round0_download_B.mlse",
                     "round0_upload_A.mlse", "round0_upload_B.mlse"]
