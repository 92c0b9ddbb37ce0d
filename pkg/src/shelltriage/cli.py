"""Operator command line: splits, embeddings, index builds, calibration,
evaluation, single-image triage, and the HTTP server.

Exit codes: 0 success, 1 validation error, 2 I/O error. Every run prints the
resolved configuration to stderr so logs capture exactly what ran. All
outputs are deterministic for a fixed --seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from shelltriage.auth import DEFAULT_TTL_SECONDS, secret_from_env, sign_token
from shelltriage.classify import ClassifierSpec, build_classifier
from shelltriage.embedding import (
    DEFAULT_DIM,
    TARGET_SIZE,
    EmbedderSpec,
    build_embedder,
    preprocess_image,
    read_embeddings_jsonl,
    write_embeddings_jsonl,
)
from shelltriage.errors import (
    IoFailure,
    MissingEmbeddingError,
    ShellTriageError,
    ValidationError,
)
from shelltriage.evaluation import anomaly_eval, confusion, emit_report, metrics
from shelltriage.gate import (
    DEFAULT_K,
    DEFAULT_THRESHOLD,
    GateConfig,
    anomaly_score,
    calibrate,
    calibration_report_json,
    gate_query,
    rejection_table,
)
from shelltriage.index import build_index, load_index, save_index
from shelltriage.manifest import (
    ManifestRecord,
    compute_stats,
    parse_manifest,
    stats_to_json,
    stratified_split,
    write_splits_csv,
)
from shelltriage.pipeline import PipelineContext, batch_triage, triage

_COAST_BASE = {"Pacific": (46.0, 92.0, 160.0), "Caribbean": (208.0, 176.0, 96.0)}


def _print_config(args: argparse.Namespace) -> None:
    doc = {k: str(v) if isinstance(v, Path) else v for k, v in vars(args).items()
           if k != "func" and not k.startswith("_")}
    print(f"resolved config: {json.dumps(doc, sort_keys=True)}", file=sys.stderr)


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(f"--ratios needs three comma-separated values: {text}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError as exc:
        raise ValidationError(f"--ratios must be numeric: {text}") from exc


def _embedder_spec(text: str, dim: int) -> EmbedderSpec:
    if text == "reference":
        return EmbedderSpec(kind="reference", dim=dim)
    if text.startswith("model:"):
        return EmbedderSpec(kind="external", dim=dim, model_path=text[len("model:"):])
    raise ValidationError(f"--embedder must be 'reference' or 'model:<path>': {text}")


def _classifier_spec(text: str, temperature: float) -> ClassifierSpec:
    if text == "centroid":
        return ClassifierSpec(kind="centroid", temperature=temperature)
    if text.startswith("model:"):
        return ClassifierSpec(
            kind="external", temperature=temperature, model_path=text[len("model:"):]
        )
    raise ValidationError(
        f"--classifier must be 'centroid' or 'model:<path>': {text}"
    )


def synthetic_tensor(record: ManifestRecord, seed: int) -> np.ndarray:
    """Deterministic stand-in image: coast base color plus keyed noise."""
    digest = hashlib.blake2b(
        f"{seed}\x1f{record.record_id}".encode("utf-8"), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    base = np.array(_COAST_BASE[record.coast], dtype=np.float64)
    noise = rng.uniform(-12.0, 12.0, size=(TARGET_SIZE, TARGET_SIZE, 3))
    return np.clip(np.rint(base[None, None, :] + noise), 0, 255).astype(np.uint8)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    try:
        Path(path).write_text(text if text.endswith("\n") else text + "\n", "utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def cmd_ingest(args: argparse.Namespace) -> int:
    manifest = parse_manifest(args.manifest)
    assignments = stratified_split(
        manifest, _parse_ratios(args.ratios), args.seed, stratify_by=args.stratify_by
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_splits_csv(assignments, out_dir / "splits.csv")
    (out_dir / "stats.json").write_text(
        stats_to_json(compute_stats(manifest)) + "\n", "utf-8"
    )
    counts = Counter(a.split for a in assignments)
    print(json.dumps({
        "records": len(manifest),
        "splits": {name: counts.get(name, 0) for name in ("Train", "Val", "Test")},
        "out_dir": str(out_dir),
    }, sort_keys=True))
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    manifest = parse_manifest(args.manifest)
    embedder = build_embedder(_embedder_spec(args.embedder, args.dim))
    if not args.synthetic and args.images_dir is None:
        raise ValidationError("embed needs --images-dir or --synthetic")
    spec = EmbedderSpec(kind="reference", dim=args.dim) if args.embedder == "reference" else None

    def one(record: ManifestRecord) -> dict:
        if args.synthetic:
            tensor = synthetic_tensor(record, args.seed)
        else:
            path = Path(args.images_dir) / record.image_path
            try:
                raw = path.read_bytes()
            except OSError as exc:
                raise IoFailure(f"cannot read image {path}: {exc}") from exc
            tensor = preprocess_image(raw, spec)
        values = embedder.embed(tensor)
        return {
            "record_id": record.record_id,
            "coast": record.coast,
            "values": values,
        }

    records = list(manifest.records)
    if args.parallelism > 1:
        with ThreadPoolExecutor(max_workers=args.parallelism) as pool:
            entries = list(pool.map(one, records))
    else:
        entries = [one(r) for r in records]
    write_embeddings_jsonl(entries, args.out)
    print(json.dumps({"embedded": len(entries), "dim": args.dim, "out": args.out},
                     sort_keys=True))
    return 0


def cmd_index_build(args: argparse.Namespace) -> int:
    entries = read_embeddings_jsonl(args.embeddings)
    coasts: dict[str, str] = {}
    if args.manifest is not None:
        coasts = {r.record_id: r.coast for r in parse_manifest(args.manifest).records}
    items = []
    for entry in entries:
        coast = entry.get("coast") or coasts.get(entry["record_id"])
        if not coast:
            raise MissingEmbeddingError(
                f"no coast label for record {entry['record_id']}; pass --manifest"
            )
        items.append((entry["record_id"], coast, entry["values"]))
    index = build_index(items)
    save_index(index, args.out)
    print(json.dumps({
        "count": len(index),
        "dim": index.dim,
        "fingerprint": index.fingerprint_hex,
        "out": args.out,
    }, sort_keys=True))
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    index = load_index(args.index)
    in_scores = [
        anomaly_score(index, e["values"], args.k)[0]
        for e in read_embeddings_jsonl(args.in_domain)
    ]
    ood_entries = read_embeddings_jsonl(args.ood) if args.ood else []
    ood_scores = [anomaly_score(index, e["values"], args.k)[0] for e in ood_entries]
    report = calibrate(in_scores, ood_scores, percentile=args.percentile)
    per_category: dict[str, list[float]] = {}
    for entry, score in zip(ood_entries, ood_scores):
        per_category.setdefault(entry.get("category", "ood"), []).append(score)
    table = rejection_table(
        per_category, GateConfig(threshold=report.lambda_star, k=args.k)
    ) if per_category else None
    _write_text(args.out, calibration_report_json(report, table))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    index = load_index(args.index)
    cfg = GateConfig(threshold=args.threshold, k=args.k)
    classifier = build_classifier(ClassifierSpec(kind="centroid"), index=index)
    entries = read_embeddings_jsonl(args.embeddings)

    pairs: list[tuple[str, str]] = []
    gate_labeled: list[tuple[str, object]] = []
    for entry in entries:
        verdict = gate_query(index, entry["values"], cfg)
        category = entry.get("category") or args.in_domain_category
        gate_labeled.append((category, verdict))
        coast = entry.get("coast")
        if coast:
            pairs.append((coast, classifier.predict(entry["values"]).label))

    metrics_report = None
    cm = None
    if pairs:
        cm = confusion(pairs)
        metrics_report = metrics(cm)
    anomaly_report = anomaly_eval(gate_labeled, args.in_domain_category)
    payload = emit_report(
        metrics_report=metrics_report, cm=cm, anomaly_report=anomaly_report,
        fmt=args.format,
    )
    _write_text(args.out, payload.decode("utf-8"))
    return 0


def _build_context(args: argparse.Namespace) -> PipelineContext:
    index = load_index(args.index)
    embedder = build_embedder(_embedder_spec(args.embedder, index.dim))
    classifier = build_classifier(
        _classifier_spec(args.classifier, args.temperature), index=index
    )
    return PipelineContext(
        embedder=embedder,
        index=index,
        gate_cfg=GateConfig(threshold=args.threshold, k=args.k),
        classifier=classifier,
    )


def cmd_triage(args: argparse.Namespace) -> int:
    ctx = _build_context(args)
    if args.image is not None:
        raw = Path(args.image).read_bytes()
        verdict = triage(raw, ctx, request_id=Path(args.image).name)
        _write_text(args.out, json.dumps(verdict.to_wire(), sort_keys=True))
        return 0
    image_dir = Path(args.dir)
    paths = sorted(
        p for p in image_dir.iterdir()
        if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not paths:
        raise ValidationError(f"no PNG/JPEG images in {image_dir}")
    verdicts = batch_triage(
        [p.read_bytes() for p in paths], ctx,
        parallelism=args.parallelism, request_ids=[p.name for p in paths],
    )
    lines = "\n".join(json.dumps(v.to_wire(), sort_keys=True) for v in verdicts)
    _write_text(args.out, lines)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from shelltriage.service import ServiceConfig, create_app

    secret = secret_from_env()
    ctx = _build_context(args) if args.index is not None else None
    if ctx is None and args.proxy_predict_url is None:
        raise ValidationError("serve needs --index or --proxy-predict-url")
    config = ServiceConfig(
        secret=secret,
        audit_path=Path(args.audit_log) if args.audit_log else None,
        audit_max_bytes=args.audit_max_bytes,
        proxy_predict_url=args.proxy_predict_url,
    )
    app = create_app(ctx, config)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_token(args: argparse.Namespace) -> int:
    print(sign_token(secret_from_env(), args.issuer, ttl_seconds=args.ttl))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shelltriage",
        description="Two-stage seashell provenance triage: anomaly gate plus "
                    "coast classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a manifest, write splits and stats")
    p.add_argument("--manifest", required=True, help="CSV or JSONL dataset manifest")
    p.add_argument("--seed", type=int, default=0, help="split shuffle seed")
    p.add_argument("--ratios", default="0.70,0.15,0.15",
                   help="train,val,test fractions (sum to 1)")
    p.add_argument("--stratify-by", choices=("family", "species"), default="family")
    p.add_argument("--out-dir", default=".", help="where splits.csv/stats.json go")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="embed manifest images (or synthetic stand-ins)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--images-dir", default=None, help="root for manifest image paths")
    p.add_argument("--synthetic", action="store_true",
                   help="generate deterministic stand-in images instead of reading files")
    p.add_argument("--seed", type=int, default=0, help="synthetic image seed")
    p.add_argument("--out", required=True, help="output embeddings JSONL")
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    p.add_argument("--embedder", default="reference",
                   help="'reference' or 'model:<path>'")
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("index", help="vector index operations")
    index_sub = p.add_subparsers(dest="index_command", required=True)
    b = index_sub.add_parser("build", help="build a binary index from embeddings")
    b.add_argument("--embeddings", required=True, help="embeddings JSONL")
    b.add_argument("--manifest", default=None,
                   help="manifest supplying coast labels when JSONL lacks them")
    b.add_argument("--out", required=True, help="output index path")
    b.set_defaults(func=cmd_index_build)

    p = sub.add_parser("calibrate", help="choose the gate threshold from scores")
    p.add_argument("--index", required=True)
    p.add_argument("--in-domain", required=True, help="in-domain embeddings JSONL")
    p.add_argument("--ood", default=None, help="out-of-domain embeddings JSONL")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--percentile", type=float, default=None,
                   help="nearest-rank percentile of in-domain scores instead of min")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="metric and rejection reports")
    p.add_argument("--index", required=True)
    p.add_argument("--embeddings", required=True,
                   help="labeled embeddings JSONL (coast and/or category per line)")
    p.add_argument("--lambda", dest="threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--in-domain-category", default="Seashells")
    p.add_argument("--format", choices=("json", "md"), default="json")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("triage", help="run the full pipeline on images")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--image", default=None, help="single image file")
    group.add_argument("--dir", default=None, help="directory of PNG/JPEG images")
    p.add_argument("--index", required=True)
    p.add_argument("--lambda", dest="threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--embedder", default="reference")
    p.add_argument("--classifier", default="centroid")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=cmd_triage)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--index", default=None)
    p.add_argument("--lambda", dest="threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--embedder", default="reference")
    p.add_argument("--classifier", default="centroid")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--proxy-predict-url", default=None,
                   help="forward /receive-files bodies to this /predict URL")
    p.add_argument("--audit-log", default=None, help="append-only JSONL verdict log")
    p.add_argument("--audit-max-bytes", type=int, default=64 * 1024 * 1024)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("token", help="mint a signed bearer token (secret from env)")
    p.add_argument("--issuer", default="shelltriage-cli")
    p.add_argument("--ttl", type=int, default=DEFAULT_TTL_SECONDS,
                   help="token lifetime in seconds")
    p.set_defaults(func=cmd_token)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; a bad flag is a
        # validation failure here, not an I/O one
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    _print_config(args)
    try:
        return args.func(args)
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ShellTriageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
