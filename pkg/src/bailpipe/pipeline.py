"""Stage orchestration: artifacts, manifests, and the end-to-end run.

Each stage reads the previous stage's artifact from a shared workspace
directory, writes its own outputs atomically, and records a manifest
(input hashes, config hash, seed, per-reason drop counts) so a run is
reproducible from (input, config, seed) alone.  Nothing here depends on
wall-clock time or absolute paths.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from collections import Counter
from dataclasses import asdict
from functools import partial
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .anonymizer import Gazetteer, anonymize
from .config import PatternConfig, PipelineConfig
from .errors import ConfigError, SegmentationError
from .evalsplit import evaluate_scores, split_all_districts, split_district_wise
from .extractor import extract_amount, extract_decision
from .ingest import corpus_stats, filter_document, load_documents, normalize_case_type
from .lexstats import DistrictTokenIndex, regional_tokens
from .mtl import TrainSample, load_params, loss_trace_rows, params_to_bytes, predict, train
from .segmenter import segment_document
from .storage import (
    atomic_write_bytes,
    atomic_write_text,
    read_json,
    read_jsonl,
    sha256_bytes,
    sha256_file,
    sha256_tree,
    write_csv,
    write_json,
    write_jsonl,
)
from .summarizer import (
    DocumentFrequencies,
    HashingSentenceEncoder,
    salience_labels,
    select_salient,
    textrank,
    tfidf_rank,
)

STAGES = (
    "clean",
    "anonymize",
    "segment",
    "extract",
    "lexstats",
    "split",
    "summarize",
    "train",
    "evaluate",
    "report",
)


def workspace_paths(out_dir: Path | str) -> dict[str, Path]:
    out = Path(out_dir)
    return {
        "kept": out / "clean" / "kept.jsonl",
        "clean_drops": out / "clean" / "drops.csv",
        "stats": out / "clean" / "stats.json",
        "anonymized": out / "anonymize" / "anonymized.jsonl",
        "segmented": out / "segment" / "segmented.jsonl",
        "segment_drops": out / "segment" / "drops.csv",
        "extracted": out / "extract" / "extracted.jsonl",
        "regional": out / "lexstats" / "regional_tokens.csv",
        "district_counts": out / "lexstats" / "district_counts.csv",
        "splits": out / "split" / "splits.json",
        "summaries": out / "summarize" / "summaries.jsonl",
        "model": out / "train" / "model.ckpt",
        "loss_trace": out / "train" / "loss_trace.csv",
        "metrics": out / "evaluate" / "metrics.json",
        "report": out / "report" / "report.txt",
    }


def _patterns_dict(patterns: PatternConfig) -> dict[str, Any]:
    return {
        "header_pivots": patterns.header_pivots,
        "header_window": patterns.header_window,
        "result_pivot": patterns.result_pivot,
        "delimiters": patterns.delimiters,
        "tags": {k: [p.pattern for p in v] for k, v in patterns.tag_patterns.items()},
        "granted": patterns.granted_tokens,
        "denied": patterns.denied_tokens,
        "bond_context": patterns.bond_context,
        "surety_context": patterns.surety_context,
        "amount_window": patterns.amount_window,
        "number_words": patterns.number_words,
        "case_type_aliases": patterns.case_type_aliases,
        "filters": asdict(patterns.filters),
    }


def config_fingerprint(cfg: PipelineConfig, patterns: PatternConfig) -> str:
    """Content hash of every setting that can influence stage outputs.

    Worker count is excluded: parallelism must not change any artifact."""
    payload = {
        "seed": cfg.seed,
        "name_tag": cfg.name_tag,
        "phone_tag": cfg.phone_tag,
        "encoder_dim": cfg.encoder_dim,
        "salient_fraction": cfg.salient_fraction,
        "lexstats": {
            "min_total": cfg.lexstats_min_total,
            "min_share": cfg.lexstats_min_share,
            "top_k": cfg.lexstats_top_k,
        },
        "train": {
            "dim": cfg.train.dim,
            "heads": cfg.train.heads,
            "epochs": cfg.train.epochs,
            "learning_rate": cfg.train.learning_rate,
            "batch_size": cfg.train.batch_size,
            "max_sentences": cfg.train.max_sentences,
            "seed": cfg.train.effective_seed,
        },
        "split": {
            "mode": cfg.split.mode,
            "ratios": list(cfg.split.ratios),
            "district_counts": list(cfg.split.district_counts),
            "rescale": cfg.split.rescale,
            "seed": cfg.split.effective_seed,
        },
        "patterns": _patterns_dict(patterns),
    }
    canonical = json.dumps(payload, ensure_ascii=False, sort_keys=True)
    return sha256_bytes(canonical.encode("utf-8"))


def _require(path: Path, stage: str) -> Path:
    if not Path(path).exists():
        raise ConfigError(
            f"{stage}: missing input artifact {path} (run the earlier stages first)"
        )
    return Path(path)


def _manifest(
    stage: str,
    out_dir: Path,
    inputs: dict[str, Path],
    outputs: dict[str, Path],
    cfg: PipelineConfig,
    patterns: PatternConfig,
    docs_in: int,
    docs_out: int,
    drops: dict[str, int],
) -> dict[str, Any]:
    input_hashes = {name: sha256_tree(Path(p)) for name, p in sorted(inputs.items())}
    joined = "\n".join(f"{name}:{h}" for name, h in sorted(input_hashes.items()))
    manifest = {
        "stage": stage,
        "inputs": input_hashes,
        "input_sha256": sha256_bytes(joined.encode("ascii")),
        "config_sha256": config_fingerprint(cfg, patterns),
        "seed": cfg.seed,
        "docs_in": docs_in,
        "docs_out": docs_out,
        "drops": dict(sorted(drops.items())),
        "outputs": {name: sha256_file(Path(p)) for name, p in sorted(outputs.items())},
    }
    write_json(Path(out_dir) / stage / "manifest.json", manifest)
    return manifest


def stage_clean(
    input_path: Path | str,
    out_dir: Path | str,
    cfg: PipelineConfig,
    patterns: PatternConfig | None = None,
) -> dict[str, Any]:
    """Load, filter and normalize the raw corpus."""
    patterns = patterns or cfg.load_patterns()
    input_path = _require(Path(input_path), "clean")
    paths = workspace_paths(out_dir)

    kept_docs = []
    kept_records = []
    drop_rows = []
    drops: Counter[str] = Counter()
    docs_in = 0
    seen: set[str] = set()
    for doc in load_documents(input_path):
        docs_in += 1
        verdict = filter_document(doc, seen, patterns.filters)
        if not verdict.kept:
            drops[verdict.reason.value] += 1
            drop_rows.append((doc.doc_id, verdict.reason.value))
            continue
        case = normalize_case_type(doc.case_type_raw, patterns.case_type_aliases)
        kept_docs.append(doc)
        kept_records.append(
            {
                "doc_id": doc.doc_id,
                "district": doc.district,
                "case_type": case.name,
                "text": doc.text,
            }
        )
    write_jsonl(paths["kept"], kept_records)
    write_csv(paths["clean_drops"], ("doc_id", "reason"), drop_rows)
    stats = corpus_stats(kept_docs)
    write_json(
        paths["stats"],
        {
            "n_docs": stats.n_docs,
            "total_tokens": stats.total_tokens,
            "unique_tokens": stats.unique_tokens,
            "mean_tokens_per_doc": stats.mean_tokens_per_doc,
        },
    )
    return _manifest(
        "clean",
        Path(out_dir),
        {"corpus": input_path},
        {"kept": paths["kept"], "drops": paths["clean_drops"], "stats": paths["stats"]},
        cfg,
        patterns,
        docs_in,
        len(kept_records),
        dict(drops),
    )


def stage_anonymize(
    out_dir: Path | str,
    cfg: PipelineConfig,
    input_path: Path | str | None = None,
) -> dict[str, Any]:
    """Replace phone numbers and gazetteer terms in every kept document."""
    patterns = cfg.load_patterns()
    paths = workspace_paths(out_dir)
    input_path = _require(Path(input_path or paths["kept"]), "anonymize")
    gaz = Gazetteer.load(
        cfg.gazetteer_replace_path,
        cfg.gazetteer_ambiguous_path,
        cfg.name_tag,
        cfg.phone_tag,
    )
    records = read_jsonl(input_path)
    out_records = [{**rec, "text": anonymize(rec["text"], gaz)} for rec in records]
    write_jsonl(paths["anonymized"], out_records)
    return _manifest(
        "anonymize",
        Path(out_dir),
        {"kept": input_path},
        {"anonymized": paths["anonymized"]},
        cfg,
        patterns,
        len(records),
        len(out_records),
        {},
    )


def _segment_record(rec: dict[str, Any], patterns: PatternConfig) -> tuple[str, dict]:
    try:
        seg = segment_document(
            rec["doc_id"],
            rec.get("district", ""),
            rec.get("case_type", ""),
            rec["text"],
            patterns,
        )
    except SegmentationError as exc:
        return "drop", {
            "doc_id": rec["doc_id"],
            "stage": exc.stage,
            "message": str(exc),
        }
    return "ok", {**seg.to_record(), "error": None}


def stage_segment(
    out_dir: Path | str,
    cfg: PipelineConfig,
    patterns: PatternConfig | None = None,
    input_path: Path | str | None = None,
) -> dict[str, Any]:
    """Split every document into header/facts/judge/result segments."""
    patterns = patterns or cfg.load_patterns()
    paths = workspace_paths(out_dir)
    input_path = _require(Path(input_path or paths["anonymized"]), "segment")
    records = read_jsonl(input_path)
    worker = partial(_segment_record, patterns=patterns)
    if cfg.workers > 1:
        with Pool(cfg.workers) as pool:
            results = pool.map(worker, records)
    else:
        results = [worker(rec) for rec in records]

    segmented = []
    drop_rows = []
    drops: Counter[str] = Counter()
    for status, payload in results:
        if status == "ok":
            segmented.append(payload)
        else:
            drops[payload["stage"]] += 1
            drop_rows.append((payload["doc_id"], payload["stage"], payload["message"]))
    write_jsonl(paths["segmented"], segmented)
    write_csv(paths["segment_drops"], ("doc_id", "stage", "message"), drop_rows)
    return _manifest(
        "segment",
        Path(out_dir),
        {"anonymized": input_path},
        {"segmented": paths["segmented"], "drops": paths["segment_drops"]},
        cfg,
        patterns,
        len(records),
        len(segmented),
        dict(drops),
    )


def stage_extract(
    out_dir: Path | str,
    cfg: PipelineConfig,
    patterns: PatternConfig | None = None,
    input_path: Path | str | None = None,
) -> dict[str, Any]:
    """Fill decision and bail-amount fields from each result segment."""
    patterns = patterns or cfg.load_patterns()
    paths = workspace_paths(out_dir)
    input_path = _require(Path(input_path or paths["segmented"]), "extract")
    records = read_jsonl(input_path)
    out_records = []
    for rec in records:
        decision = extract_decision(rec["result"], patterns)
        amount = extract_amount(rec["result"], patterns)
        out_records.append(
            {
                **rec,
                "decision": decision.value,
                "amount_total": amount.total,
                "amount_components": [c.to_record() for c in amount.components],
            }
        )
    write_jsonl(paths["extracted"], out_records)
    return _manifest(
        "extract",
        Path(out_dir),
        {"segmented": input_path},
        {"extracted": paths["extracted"]},
        cfg,
        patterns,
        len(records),
        len(out_records),
        {},
    )


def stage_lexstats(
    out_dir: Path | str,
    cfg: PipelineConfig,
    input_path: Path | str | None = None,
) -> dict[str, Any]:
    """District-level token concentration plus per-district doc counts."""
    patterns = cfg.load_patterns()
    paths = workspace_paths(out_dir)
    input_path = _require(Path(input_path or paths["anonymized"]), "lexstats")
    records = read_jsonl(input_path)
    index = DistrictTokenIndex.from_documents(
        (rec.get("district", ""), rec["text"]) for rec in records
    )
    regional = regional_tokens(
        index,
        min_total=cfg.lexstats_min_total,
        min_share=cfg.lexstats_min_share,
        k=cfg.lexstats_top_k,
    )
    rows = []
    for dist in regional:
        top_district = max(dist.per_district.items(), key=lambda kv: (kv[1], kv[0]))
        rows.append(
            (
                dist.token,
                dist.total,
                f"{dist.top_k_share(cfg.lexstats_top_k):.6f}",
                top_district[0],
                top_district[1],
            )
        )
    write_csv(
        paths["regional"],
        ("token", "total", "share", "top_district", "top_district_count"),
        rows,
    )
    doc_counts = Counter(rec.get("district", "") for rec in records)
    count_rows = sorted(doc_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    write_csv(paths["district_counts"], ("district", "count"), count_rows)
    return _manifest(
        "lexstats",
        Path(out_dir),
        {"anonymized": input_path},
        {
            "regional": paths["regional"],
            "district_counts": paths["district_counts"],
        },
        cfg,
        patterns,
        len(records),
        len(records),
        {},
    )


def stage_split(
    out_dir: Path | str,
    cfg: PipelineConfig,
    input_path: Path | str | None = None,
) -> dict[str, Any]:
    """Partition extracted documents into train/val/test id lists."""
    patterns = cfg.load_patterns()
    paths = workspace_paths(out_dir)
    input_path = _require(Path(input_path or paths["extracted"]), "split")
    records = read_jsonl(input_path)
    if not records:
        raise ConfigError("split: no documents left to split")
    if cfg.split.mode == "district":
        train_recs, val_recs, test_recs = split_district_wise(
            records, cfg.split, district_of=lambda r: r.get("district", "")
        )
    else:
        train_recs, val_recs, test_recs = split_all_districts(records, cfg.split)
    payload = {
        "mode": cfg.split.mode,
        "seed": cfg.split.effective_seed,
        "counts": {
            "train": len(train_recs),
            "val": len(val_recs),
            "test": len(test_recs),
        },
        "train": [r["doc_id"] for r in train_recs],
        "val": [r["doc_id"] for r in val_recs],
        "test": [r["doc_id"] for r in test_recs],
    }
    write_json(paths["splits"], payload)
    return _manifest(
        "split",
        Path(out_dir),
        {"extracted": input_path},
        {"splits": paths["splits"]},
        cfg,
        patterns,
        len(records),
        len(records),
        {},
    )


def stage_summarize(
    out_dir: Path | str,
    cfg: PipelineConfig,
    input_path: Path | str | None = None,
    splits_path: Path | str | None = None,
) -> dict[str, Any]:
    """Salience labels plus TF-IDF and TextRank rankings per document.

    Document frequencies are fit on the training split only, so the test
    side never leaks into the ranking statistics."""
    patterns = cfg.load_patterns()
    paths = workspace_paths(out_dir)
    input_path = _require(Path(input_path or paths["extracted"]), "summarize")
    splits_path = _require(Path(splits_path or paths["splits"]), "summarize")
    records = read_jsonl(input_path)
    splits = read_json(splits_path)
    train_ids = set(splits["train"])
    dfreq = DocumentFrequencies.fit(
        " ".join(rec["facts"]) for rec in records if rec["doc_id"] in train_ids
    )
    encoder = HashingSentenceEncoder(cfg.encoder_dim)
    out_records = []
    drops: Counter[str] = Counter()
    for rec in records:
        facts = rec["facts"]
        summary = " ".join(rec["judge_sentences"])
        labels = salience_labels(facts, summary, encoder, cfg.salient_fraction)
        ranked = tfidf_rank(facts, dfreq)
        selected = select_salient(ranked, cfg.salient_fraction)
        try:
            tr = [[r.index, r.score] for r in textrank(facts)]
            tr_error = None
        except Exception as exc:  # noqa: BLE001 - recorded, not fatal
            tr = None
            tr_error = str(exc)
            drops["textrank_no_convergence"] += 1
        out_records.append(
            {
                "doc_id": rec["doc_id"],
                "salience": [int(l.salient) for l in labels],
                "salience_scores": [l.score for l in labels],
                "tfidf_ranking": [[r.index, r.score] for r in ranked],
                "tfidf_selected": selected,
                "textrank": tr,
                "textrank_error": tr_error,
            }
        )
    write_jsonl(paths["summaries"], out_records)
    return _manifest(
        "summarize",
        Path(out_dir),
        {"extracted": input_path, "splits": splits_path},
        {"summaries": paths["summaries"]},
        cfg,
        patterns,
        len(records),
        len(out_records),
        dict(drops),
    )


def _doc_embeddings(
    facts: Sequence[str], encoder: HashingSentenceEncoder, max_sentences: int
) -> np.ndarray:
    clipped = list(facts)[:max_sentences]
    return np.stack([encoder(s) for s in clipped])


def stage_train(
    out_dir: Path | str,
    cfg: PipelineConfig,
    input_path: Path | str | None = None,
    summaries_path: Path | str | None = None,
    splits_path: Path | str | None = None,
) -> dict[str, Any]:
    """Fit the multi-task model on the training split."""
    patterns = cfg.load_patterns()
    paths = workspace_paths(out_dir)
    input_path = _require(Path(input_path or paths["extracted"]), "train")
    summaries_path = _require(Path(summaries_path or paths["summaries"]), "train")
    splits_path = _require(Path(splits_path or paths["splits"]), "train")
    records = {rec["doc_id"]: rec for rec in read_jsonl(input_path)}
    summaries = {rec["doc_id"]: rec for rec in read_jsonl(summaries_path)}
    splits = read_json(splits_path)

    encoder = HashingSentenceEncoder(cfg.train.dim)
    samples = []
    drops: Counter[str] = Counter()
    for doc_id in splits["train"]:
        rec = records[doc_id]
        if rec["decision"] not in ("granted", "dismissed"):
            drops["unknown_decision"] += 1
            continue
        emb = _doc_embeddings(rec["facts"], encoder, cfg.train.max_sentences)
        sal = np.asarray(
            summaries[doc_id]["salience"][: cfg.train.max_sentences], dtype=float
        )
        samples.append(TrainSample(emb, int(rec["decision"] == "granted"), sal))
    if not samples:
        raise ConfigError("train: no labeled training documents")
    params, trace = train(samples, cfg.train)
    atomic_write_bytes(paths["model"], params_to_bytes(params))
    write_csv(
        paths["loss_trace"],
        ("epoch", "l_bail", "l_salience", "total"),
        [
            (row["epoch"], f"{row['bail']:.10f}", f"{row['salience']:.10f}", f"{row['total']:.10f}")
            for row in loss_trace_rows(trace)
        ],
    )
    return _manifest(
        "train",
        Path(out_dir),
        {
            "extracted": input_path,
            "summaries": summaries_path,
            "splits": splits_path,
        },
        {"model": paths["model"], "loss_trace": paths["loss_trace"]},
        cfg,
        patterns,
        len(splits["train"]),
        len(samples),
        dict(drops),
    )


def stage_evaluate(
    out_dir: Path | str,
    cfg: PipelineConfig,
    input_path: Path | str | None = None,
    splits_path: Path | str | None = None,
    model_path: Path | str | None = None,
) -> dict[str, Any]:
    """Score the test split and write the metrics file."""
    patterns = cfg.load_patterns()
    paths = workspace_paths(out_dir)
    input_path = _require(Path(input_path or paths["extracted"]), "evaluate")
    splits_path = _require(Path(splits_path or paths["splits"]), "evaluate")
    model_path = _require(Path(model_path or paths["model"]), "evaluate")
    records = {rec["doc_id"]: rec for rec in read_jsonl(input_path)}
    splits = read_json(splits_path)
    params = load_params(model_path)
    encoder = HashingSentenceEncoder(params.dim)

    scores = []
    labels = []
    drops: Counter[str] = Counter()
    for doc_id in splits["test"]:
        rec = records[doc_id]
        if rec["decision"] not in ("granted", "dismissed"):
            drops["unknown_decision"] += 1
            continue
        emb = _doc_embeddings(rec["facts"], encoder, cfg.train.max_sentences)
        scores.append(predict(params, emb, cfg.train.ln_eps).bail_prob)
        labels.append(int(rec["decision"] == "granted"))
    if not labels:
        raise ConfigError("evaluate: no labeled test documents")
    report = evaluate_scores(scores, labels)
    payload = report.to_dict()
    payload["splits"] = dict(splits["counts"])
    payload["threshold"] = 0.5
    payload["seed"] = cfg.seed
    write_json(paths["metrics"], payload)
    return _manifest(
        "evaluate",
        Path(out_dir),
        {
            "extracted": input_path,
            "splits": splits_path,
            "model": model_path,
        },
        {"metrics": paths["metrics"]},
        cfg,
        patterns,
        len(splits["test"]),
        len(labels),
        dict(drops),
    )


def stage_report(out_dir: Path | str, cfg: PipelineConfig) -> dict[str, Any]:
    """Plain-text run summary assembled from the stage artifacts."""
    patterns = cfg.load_patterns()
    paths = workspace_paths(out_dir)
    out = Path(out_dir)
    clean_manifest = read_json(_require(out / "clean" / "manifest.json", "report"))
    segment_manifest = read_json(_require(out / "segment" / "manifest.json", "report"))
    extracted = read_jsonl(_require(paths["extracted"], "report"))
    splits = read_json(_require(paths["splits"], "report"))
    metrics = read_json(_require(paths["metrics"], "report"))

    decisions = Counter(rec["decision"] for rec in extracted)
    amounts = [rec["amount_total"] for rec in extracted if rec["amount_total"]]
    lines = ["Bail pipeline run summary", "=" * 25, ""]
    lines.append(
        f"Cleaning: {clean_manifest['docs_in']} in, "
        f"{clean_manifest['docs_out']} kept"
    )
    for reason, count in sorted(clean_manifest["drops"].items()):
        lines.append(f"  dropped {reason}: {count}")
    lines.append(
        f"Segmentation: {segment_manifest['docs_in']} in, "
        f"{segment_manifest['docs_out']} segmented"
    )
    for stage_name, count in sorted(segment_manifest["drops"].items()):
        lines.append(f"  failed at {stage_name}: {count}")
    lines.append("Decisions:")
    for name, count in sorted(decisions.items()):
        lines.append(f"  {name}: {count}")
    if amounts:
        lines.append(
            f"Bail amounts: {len(amounts)} docs, median {statistics.median(amounts):g}"
        )
    counts = splits["counts"]
    lines.append(
        f"Split ({splits['mode']}, seed {splits['seed']}): "
        f"train={counts['train']} val={counts['val']} test={counts['test']}"
    )
    m = metrics["metrics"]
    lines.append(
        "Test metrics: "
        f"accuracy={m['accuracy']:.4f} precision={m['precision']:.4f} "
        f"recall={m['recall']:.4f} f1={m['f1']:.4f} macro_f1={m['macro_f1']:.4f}"
    )
    if "roc" in metrics:
        lines.append(f"Test AUC: {metrics['roc']['auc']:.4f}")
    regional_path = paths["regional"]
    if regional_path.exists():
        rows = list(csv.reader(io.StringIO(regional_path.read_text(encoding="utf-8"))))
        if len(rows) > 1:
            lines.append("Top regional tokens:")
            for token, total, share, district, _ in rows[1:6]:
                lines.append(f"  {token} ({district}, share {share}, n={total})")
    text = "\n".join(lines) + "\n"
    atomic_write_text(paths["report"], text)
    return _manifest(
        "report",
        Path(out_dir),
        {"metrics": paths["metrics"], "extracted": paths["extracted"]},
        {"report": paths["report"]},
        cfg,
        patterns,
        len(extracted),
        len(extracted),
        {},
    )


def run_all(
    input_path: Path | str, out_dir: Path | str, cfg: PipelineConfig
) -> dict[str, Any]:
    """Run every stage in order; returns the manifests keyed by stage."""
    patterns = cfg.load_patterns()
    manifests = {
        "clean": stage_clean(input_path, out_dir, cfg, patterns),
        "anonymize": stage_anonymize(out_dir, cfg),
        "segment": stage_segment(out_dir, cfg, patterns),
        "extract": stage_extract(out_dir, cfg, patterns),
        "lexstats": stage_lexstats(out_dir, cfg),
        "split": stage_split(out_dir, cfg),
        "summarize": stage_summarize(out_dir, cfg),
        "train": stage_train(out_dir, cfg),
        "evaluate": stage_evaluate(out_dir, cfg),
        "report": stage_report(out_dir, cfg),
    }
    return manifests
