import json

import pytest

from bailpipe.config import load_pipeline_config
from bailpipe.errors import ConfigError, PipelineError
from bailpipe.evalsplit import SplitSpec
from bailpipe.fixtures import generate_fixtures
from bailpipe.mtl import TrainConfig, init_params, save_params
from bailpipe.pipeline import (
    STAGES,
    config_fingerprint,
    run_all,
    stage_evaluate,
    stage_extract,
    stage_split,
    stage_train,
    workspace_paths,
)
from bailpipe.storage import read_json, read_jsonl, sha256_file, write_json, write_jsonl

N_DOCS = 40


def _test_config(**overrides):
    cfg = load_pipeline_config(**overrides)
    cfg.train = TrainConfig(dim=16, heads=4, epochs=2, batch_size=4, seed=cfg.seed)
    return cfg


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """One full pipeline run on a small clean fixture corpus."""
    root = tmp_path_factory.mktemp("pipeline")
    fixture = generate_fixtures(N_DOCS, seed=2021, noise_level=0.0)
    corpus = fixture.write(root / "fixture")
    out_dir = root / "ws"
    cfg = _test_config()
    manifests = run_all(corpus, out_dir, cfg)
    return {
        "root": root,
        "corpus": corpus,
        "out": out_dir,
        "cfg": cfg,
        "manifests": manifests,
        "truth": fixture.truth,
    }


def test_workspace_paths_layout(tmp_path):
    paths = workspace_paths(tmp_path)
    assert set(paths) == {
        "kept",
        "clean_drops",
        "stats",
        "anonymized",
        "segmented",
        "segment_drops",
        "extracted",
        "regional",
        "district_counts",
        "splits",
        "summaries",
        "model",
        "loss_trace",
        "metrics",
        "report",
    }
    for p in paths.values():
        assert tmp_path in p.parents
        assert p.parent.name in STAGES


def test_run_all_writes_every_artifact(ws):
    paths = workspace_paths(ws["out"])
    for name, p in paths.items():
        assert p.is_file(), name
    for stage in STAGES:
        assert (ws["out"] / stage / "manifest.json").is_file()
    assert set(ws["manifests"]) == set(STAGES)


def test_manifest_accounting(ws):
    m = ws["manifests"]
    assert m["clean"]["docs_in"] == N_DOCS + 5
    assert m["clean"]["docs_out"] == N_DOCS
    assert sum(m["clean"]["drops"].values()) == 5
    assert set(m["clean"]["drops"]) == {
        "TooShortBlank",
        "Duplicate",
        "TooShort",
        "TooLong",
        "NonTargetScript",
    }
    for stage in STAGES:
        stage_m = m[stage]
        assert stage_m["stage"] == stage
        assert stage_m["docs_in"] == stage_m["docs_out"] + sum(
            stage_m["drops"].values()
        )
        assert stage_m["seed"] == ws["cfg"].seed


def test_manifests_have_no_absolute_paths(ws):
    for stage in STAGES:
        raw = (ws["out"] / stage / "manifest.json").read_text(encoding="utf-8")
        assert str(ws["out"]) not in raw


def test_clean_drop_rows_name_the_junk(ws):
    raw = workspace_paths(ws["out"])["clean_drops"].read_text(encoding="utf-8")
    rows = dict(
        line.split(",", 1) for line in raw.strip().splitlines()[1:]
    )
    assert rows == {
        "junk-blank": "TooShortBlank",
        "junk-dup": "Duplicate",
        "junk-short": "TooShort",
        "junk-long": "TooLong",
        "junk-english": "NonTargetScript",
    }


def test_clean_stats(ws):
    stats = read_json(workspace_paths(ws["out"])["stats"])
    assert stats["n_docs"] == N_DOCS
    assert stats["total_tokens"] > 0
    assert stats["unique_tokens"] > 0
    assert stats["mean_tokens_per_doc"] == pytest.approx(
        stats["total_tokens"] / stats["n_docs"]
    )


def test_anonymize_removed_gazetteer_hits(ws):
    records = read_jsonl(workspace_paths(ws["out"])["anonymized"])
    assert len(records) == N_DOCS
    cfg = ws["cfg"]
    for rec in records:
        assert cfg.name_tag in rec["text"]
        assert cfg.phone_tag in rec["text"]


def test_segmented_records_carry_placeholders(ws):
    records = read_jsonl(workspace_paths(ws["out"])["segmented"])
    assert len(records) == N_DOCS
    for rec in records:
        assert rec["error"] is None
        assert rec["decision"] is None
        assert rec["judge_sentences"]
        assert rec["facts"]


def test_extracted_matches_sidecar(ws):
    records = read_jsonl(workspace_paths(ws["out"])["extracted"])
    truth = ws["truth"]
    assert len(records) == N_DOCS
    for rec in records:
        t = truth[rec["doc_id"]]
        assert rec["decision"] == t["decision"], rec["doc_id"]
        assert rec["amount_total"] == t["amount_total"], rec["doc_id"]


def test_split_partitions_extracted(ws):
    splits = read_json(workspace_paths(ws["out"])["splits"])
    assert splits["mode"] == "all"
    assert splits["counts"] == {"train": 28, "val": 4, "test": 8}
    all_ids = splits["train"] + splits["val"] + splits["test"]
    extracted_ids = {r["doc_id"] for r in read_jsonl(workspace_paths(ws["out"])["extracted"])}
    assert len(all_ids) == len(set(all_ids)) == N_DOCS
    assert set(all_ids) == extracted_ids


def test_summaries_shapes(ws):
    records = read_jsonl(workspace_paths(ws["out"])["summaries"])
    extracted = {r["doc_id"]: r for r in read_jsonl(workspace_paths(ws["out"])["extracted"])}
    assert len(records) == N_DOCS
    for rec in records:
        n = len(extracted[rec["doc_id"]]["facts"])
        assert len(rec["salience"]) == n
        assert set(rec["salience"]) <= {0, 1}
        assert sorted(i for i, _ in rec["tfidf_ranking"]) == list(range(n))
        assert rec["textrank_error"] is None
        assert sorted(i for i, _ in rec["textrank"]) == list(range(n))
        assert rec["tfidf_selected"] == sorted(rec["tfidf_selected"])


def test_loss_trace_rows(ws):
    raw = workspace_paths(ws["out"])["loss_trace"].read_text(encoding="utf-8")
    lines = raw.strip().splitlines()
    assert lines[0] == "epoch,l_bail,l_salience,total"
    assert len(lines) == 1 + ws["cfg"].train.epochs
    first = lines[1].split(",")
    assert float(first[1]) + float(first[2]) == pytest.approx(float(first[3]))


def test_metrics_payload(ws):
    metrics = read_json(workspace_paths(ws["out"])["metrics"])
    assert set(metrics) >= {"counts", "metrics", "roc", "densities", "splits", "threshold", "seed"}
    assert metrics["threshold"] == 0.5
    assert metrics["seed"] == ws["cfg"].seed
    assert metrics["splits"] == {"train": 28, "val": 4, "test": 8}
    assert sum(metrics["counts"].values()) == 8
    assert metrics["densities"]["bins"] == 50


def test_report_mentions_key_numbers(ws):
    text = workspace_paths(ws["out"])["report"].read_text(encoding="utf-8")
    assert f"{N_DOCS + 5} in" in text
    assert "accuracy=" in text
    assert "train=28 val=4 test=8" in text


def test_stage_rerun_is_byte_identical(ws):
    extracted = workspace_paths(ws["out"])["extracted"]
    before = sha256_file(extracted)
    stage_extract(ws["out"], ws["cfg"])
    assert sha256_file(extracted) == before


def test_parallel_and_repeat_runs_are_byte_identical(ws):
    out2 = ws["root"] / "ws2"
    cfg2 = _test_config(workers=2)
    run_all(ws["corpus"], out2, cfg2)
    paths1 = workspace_paths(ws["out"])
    paths2 = workspace_paths(out2)
    for name in paths1:
        assert sha256_file(paths1[name]) == sha256_file(paths2[name]), name
    for stage in STAGES:
        m1 = ws["out"] / stage / "manifest.json"
        m2 = out2 / stage / "manifest.json"
        assert sha256_file(m1) == sha256_file(m2), stage


def test_config_fingerprint_ignores_workers_tracks_seed(ws):
    patterns = ws["cfg"].load_patterns()
    base = config_fingerprint(_test_config(), patterns)
    assert config_fingerprint(_test_config(workers=4), patterns) == base
    assert config_fingerprint(_test_config(seed=1), patterns) != base


def test_missing_artifact_is_config_error(tmp_path):
    cfg = _test_config()
    with pytest.raises(ConfigError, match="split: missing input artifact"):
        stage_split(tmp_path, cfg)
    assert issubclass(ConfigError, PipelineError)


def test_district_split_mode_holds_out_districts(ws, tmp_path):
    cfg = _test_config()
    cfg.split = SplitSpec(mode="district", seed=cfg.seed)
    extracted_path = workspace_paths(ws["out"])["extracted"]
    stage_split(tmp_path, cfg, input_path=extracted_path)
    splits = read_json(workspace_paths(tmp_path)["splits"])
    assert splits["mode"] == "district"
    by_id = {r["doc_id"]: r["district"] for r in read_jsonl(extracted_path)}
    train_d = {by_id[i] for i in splits["train"]}
    val_d = {by_id[i] for i in splits["val"]}
    test_d = {by_id[i] for i in splits["test"]}
    assert not (train_d & val_d) and not (train_d & test_d) and not (val_d & test_d)
    # 7 fixture districts apportioned 4/1/2.
    assert (len(train_d), len(val_d), len(test_d)) == (4, 1, 2)


def _mini_artifacts(tmp_path, decision: str):
    paths = workspace_paths(tmp_path)
    write_jsonl(
        paths["extracted"],
        [
            {
                "doc_id": "d1",
                "district": "x",
                "facts": ["क ख", "ग घ"],
                "judge_sentences": ["आदेश"],
                "decision": decision,
                "amount_total": None,
            }
        ],
    )
    write_json(
        paths["splits"],
        {
            "mode": "all",
            "seed": 0,
            "counts": {"train": 1, "val": 0, "test": 1},
            "train": ["d1"],
            "val": [],
            "test": ["d1"],
        },
    )
    write_jsonl(paths["summaries"], [{"doc_id": "d1", "salience": [1, 0]}])
    return paths


def test_train_requires_labeled_documents(tmp_path):
    cfg = _test_config()
    _mini_artifacts(tmp_path, decision="unknown")
    with pytest.raises(ConfigError, match="no labeled training documents"):
        stage_train(tmp_path, cfg)


def test_evaluate_requires_labeled_documents(tmp_path):
    cfg = _test_config()
    paths = _mini_artifacts(tmp_path, decision="unknown")
    save_params(init_params(cfg.train), paths["model"])
    with pytest.raises(ConfigError, match="no labeled test documents"):
        stage_evaluate(tmp_path, cfg)


def test_split_rejects_empty_corpus(tmp_path):
    cfg = _test_config()
    paths = workspace_paths(tmp_path)
    write_jsonl(paths["extracted"], [])
    with pytest.raises(ConfigError, match="no documents left to split"):
        stage_split(tmp_path, cfg)


def test_train_drop_counter_for_unknown_decisions(tmp_path):
    cfg = _test_config()
    paths = _mini_artifacts(tmp_path, decision="granted")
    records = read_jsonl(paths["extracted"])
    records.append(
        {
            "doc_id": "d2",
            "district": "x",
            "facts": ["च छ"],
            "judge_sentences": ["आदेश"],
            "decision": "unknown",
            "amount_total": None,
        }
    )
    write_jsonl(paths["extracted"], records)
    splits = read_json(paths["splits"])
    splits["train"] = ["d1", "d2"]
    splits["counts"]["train"] = 2
    write_json(paths["splits"], splits)
    summaries = read_jsonl(paths["summaries"])
    summaries.append({"doc_id": "d2", "salience": [1]})
    write_jsonl(paths["summaries"], summaries)
    manifest = stage_train(tmp_path, cfg)
    assert manifest["drops"] == {"unknown_decision": 1}
    assert manifest["docs_in"] == 2
    assert manifest["docs_out"] == 1
    assert paths["model"].is_file()


def test_run_all_decoding_error_surfaces(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_bytes(b'{"doc_id": "a", "text": "\xff\xfe"}\n')
    cfg = _test_config()
    with pytest.raises(PipelineError):
        run_all(bad, tmp_path / "ws", cfg)
