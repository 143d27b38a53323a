"""Command-line interface: one executable for the full pipeline.

Subcommands cover corpus validation, synthetic data generation, the
representation sweep, projection training, indexing, querying, the BM25
baseline, evaluation, and the ablation grid. Every artifact gets a
``<path>.meta.json`` sidecar (or an embedded ``config`` field for JSON
reports) echoing the exact run configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evaluation, lexical, projection, ranking, represent, sweep
from .errors import MissingVariantDataError, TypeseekError
from .index import VectorIndex
from .represent import EOS_SPAN_ID, RepresentationKey

DEFAULT_SYNTH_KEYS = (
    "1:attn.v,5:attn.v,9:attn.v,13:attn.v,17:attn.v,21:attn.v,25:attn.v,31:block.out"
)
DEFAULT_INFORMATIVE_KEY = "17:attn.v"
QUERY_SPAN_ID = "desc"


def _write_meta(path: str | Path, config: dict) -> None:
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump({"config": config}, fh, ensure_ascii=False, separators=(",", ":"))
        fh.write("\n")


def _config_dict(args: argparse.Namespace) -> dict:
    cfg = {}
    for key in sorted(vars(args)):
        if key == "func":
            continue
        value = getattr(args, key)
        cfg[key] = str(value) if isinstance(value, Path) else value
    cfg["threads"] = int(os.environ.get("NR_THREADS", cfg.get("threads") or 1))
    return cfg


def _parse_keys(text: str) -> list[RepresentationKey]:
    return [RepresentationKey.parse(part) for part in text.split(",") if part]


def _load_anchor(qstore, key: RepresentationKey, name: str) -> np.ndarray:
    return qstore.get(key, name, QUERY_SPAN_ID)


# --- subcommands -----------------------------------------------------------------

def cmd_validate(args) -> int:
    corp = corpus_mod.load_corpus(args.corpus)
    n_spans = sum(len(d.spans) for d in corp)
    print(f"corpus: {len(corp)} documents, {n_spans} spans, "
          f"{len(corp.mentions_by_type())} types")
    if args.dump:
        store = represent.load_dump(args.dump, corpus=corp)
        print(f"dump: {store.num_records()} records across {len(store.keys())} keys")
    if args.queries:
        queries = corpus_mod.load_queries(args.queries)
        for q in queries:
            missing = [d for d in q.relevant_doc_ids if d not in corp]
            if missing:
                raise corpus_mod.CorpusValidationError(
                    f"query {q.query_id!r}: unknown relevant docs {missing[:5]}"
                )
        print(f"queries: {len(queries)} entries, ground truth resolves")
    return 0


def cmd_gen_synthetic(args) -> int:
    keys = _parse_keys(args.keys)
    informative = RepresentationKey.parse(args.informative_key)
    dims = {k: args.dim for k in keys}
    dims[informative] = args.informative_dim or args.dim
    data = represent.synth_generate(
        num_types=args.types,
        mentions_per_type=args.mentions,
        dims=dims,
        informative_key=informative,
        separation=args.separation,
        noise=args.noise,
        seed=args.seed,
        signal_dim=args.signal_dim,
        nuisance_dim=args.nuisance_dim,
        nuisance_scale=args.nuisance_scale,
        lexical_hint_rate=args.lexical_hint_rate,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _config_dict(args)
    corpus_path = out / "corpus.jsonl"
    dump_path = out / ("dump.nrd" if args.binary_dump else "dump.jsonl")
    queries_path = out / "queries.jsonl"
    qdump_path = out / "query_dump.jsonl"
    corpus_mod.save_corpus(data.corpus, corpus_path)
    represent.save_dump(data.store, dump_path, binary=args.binary_dump)
    corpus_mod.save_queries(data.queries(), queries_path)
    represent.save_dump(data.query_store(), qdump_path)
    for path in (corpus_path, dump_path, queries_path, qdump_path):
        _write_meta(path, cfg)
    print(f"wrote {corpus_path}, {dump_path}, {queries_path}, {qdump_path}")
    return 0


def cmd_sweep(args) -> int:
    corp = corpus_mod.load_corpus(args.corpus)
    store = represent.load_dump(args.dump)
    keys = _parse_keys(args.keys) if args.keys else store.keys()
    seeds = [args.seed_base + i for i in range(args.seeds)]
    result = sweep.run_sweep(
        store, corp, keys, seeds,
        types_sample=args.types, mentions_per_type=args.mentions,
    )
    sweep.export_heatmap_csv(result, args.out)
    depth_path = Path(args.out).with_suffix(".depth.csv")
    sweep.export_depth_csv(result, depth_path)
    cfg = _config_dict(args)
    _write_meta(args.out, cfg)
    _write_meta(depth_path, cfg)
    for key, mean in result.ranked_keys():
        print(f"{key}\t{mean:.4f}")
    return 0


def _resolve_split(all_types: list[str], args) -> tuple[list[str], list[str]]:
    if args.test_types:
        test = [t for t in args.test_types.split(",") if t]
        unknown = set(test) - set(all_types)
        if unknown:
            raise TypeseekError(f"unknown test types: {sorted(unknown)}")
    elif args.holdout:
        rng = np.random.default_rng(args.seed)
        idx = rng.choice(len(all_types), size=args.holdout, replace=False)
        test = [all_types[i] for i in sorted(idx)]
    else:
        test = []
    train = [t for t in all_types if t not in set(test)]
    return train, test


def cmd_train(args) -> int:
    corp = corpus_mod.load_corpus(args.corpus)
    store = represent.load_dump(args.dump)
    qstore = represent.load_dump(args.query_dump)
    queries = corpus_mod.load_queries(args.queries)
    key = RepresentationKey.parse(args.key)

    all_types = sorted(q.query_id for q in queries)
    train_types, test_types = _resolve_split(all_types, args)
    descriptions = {q.query_id: q.description for q in queries}
    anchors = {
        t: (descriptions[t], _load_anchor(qstore, key, t)) for t in train_types
    }

    config = projection.TrainConfig(
        margin=args.margin,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        hard_negative_fraction=args.hard_negative_fraction,
        seed=args.seed,
    )
    model = projection.ProjectionModel.initialize(
        in_dim=store.dim(key),
        hidden_dim=args.hidden_dim,
        out_dim=args.out_dim,
        dropout_rate=args.dropout,
        seed=args.seed,
    )
    triplets = projection.build_triplets(
        corp, store, key, anchors, train_types, test_types,
        per_type=args.triplets_per_type, config=config,
    )
    model, trace = projection.train(model, triplets, config)
    cfg = _config_dict(args)
    cfg["test_types"] = test_types
    projection.save_model(model, args.out, extra=cfg)
    _write_meta(args.out, cfg)
    for epoch, loss in enumerate(trace):
        print(f"epoch {epoch}: mean loss {loss:.6f}")
    if test_types:
        print(f"held-out types: {','.join(test_types)}")
    return 0


def _build_index(store, key: RepresentationKey, model, token: str) -> VectorIndex:
    want_eos = token == "eos"
    dim = model.out_dim if model is not None else store.dim(key)
    index = VectorIndex(dim=dim)
    count = 0
    for doc_id, span_id, vec in store.records(key):
        if (span_id == EOS_SPAN_ID) != want_eos:
            continue
        out = projection.forward(model, vec) if model is not None else vec
        index.add(out, doc_id, span_id)
        count += 1
    if count == 0:
        raise MissingVariantDataError(
            f"dump has no {'EOS' if want_eos else 'span'} records at key {key}"
        )
    return index


def cmd_index(args) -> int:
    store = represent.load_dump(args.dump)
    if args.corpus:
        corp = corpus_mod.load_corpus(args.corpus)
        store.validate_against(corp)
    key = RepresentationKey.parse(args.key)
    model = projection.load_model(args.model)[0] if args.model else None
    index = _build_index(store, key, model, args.token)
    index.save(args.out)
    _write_meta(args.out, _config_dict(args))
    print(f"indexed {len(index)} entries at dim {index.dim} -> {args.out}")
    return 0


def _project_query(qstore, key, name, model) -> np.ndarray:
    raw = _load_anchor(qstore, key, name)
    return projection.forward(model, raw) if model is not None else np.asarray(raw, float)


def cmd_query(args) -> int:
    if not args.type and not args.queries:
        raise TypeseekError("query needs --type NAME or --queries FILE")
    if args.queries and not args.out:
        raise TypeseekError("batch query (--queries) needs --out")
    index = VectorIndex.load(args.index)
    qstore = represent.load_dump(args.query_dump)
    key = RepresentationKey.parse(args.key)
    model = projection.load_model(args.model)[0] if args.model else None

    if args.type:
        q = _project_query(qstore, key, args.type, model)
        result = index.query_topk(q, args.k, min_score=args.min_score)
        for item in result:
            print(f"{item.doc_id}\t{item.score:.6f}\t{item.span_id}")
        if args.out:
            ranking.save_results({args.type: result}, args.out)
            _write_meta(args.out, _config_dict(args))
        return 0

    queries = corpus_mod.load_queries(args.queries)
    results = {}
    for query in queries:
        q = _project_query(qstore, key, query.query_id, model)
        results[query.query_id] = index.query_topk(q, args.k, min_score=args.min_score)
    ranking.save_results(results, args.out)
    _write_meta(args.out, _config_dict(args))
    print(f"wrote rankings for {len(results)} queries -> {args.out}")
    return 0


def cmd_baseline_bm25(args) -> int:
    corp = corpus_mod.load_corpus(args.corpus)
    queries = corpus_mod.load_queries(args.queries)
    bm25 = lexical.Bm25Index.build(corp, k1=args.k1, b=args.b)
    results = {q.query_id: bm25.top_k(q.description, args.k) for q in queries}
    ranking.save_results(results, args.out)
    _write_meta(args.out, _config_dict(args))
    print(f"wrote BM25 rankings for {len(results)} queries -> {args.out}")
    return 0


def _parse_metrics(text: str) -> tuple[int, ...]:
    ks = []
    for part in text.split(","):
        part = part.strip()
        if part == "rprec" or not part:
            continue
        if part.startswith("p@"):
            ks.append(int(part[2:]))
        else:
            raise TypeseekError(f"unknown metric {part!r} (use rprec, p@K)")
    return tuple(ks)


def cmd_evaluate(args) -> int:
    queries = corpus_mod.load_queries(args.queries)
    ks = _parse_metrics(args.metrics)
    systems = {}
    for path in args.results:
        name = Path(path).stem
        if name in systems:
            raise TypeseekError(f"duplicate system name {name!r} among results files")
        systems[name] = ranking.load_results(path)
    report = evaluation.compare_systems(systems, queries, ks=ks, alpha=args.alpha)
    payload = report.to_dict()
    payload["config"] = _config_dict(args)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=False)
        fh.write("\n")
    for system in report.systems:
        ps = " ".join(f"p@{k}={v:.4f}" for k, v in system.macro_precision_at.items())
        print(f"{system.name}\trprec={system.macro_r_precision:.4f}\t{ps}")
    for entry in report.significance:
        print(
            f"wilcoxon {entry.system_a} > {entry.system_b}: "
            f"W={entry.statistic:.1f} p={entry.p_value:.4f} "
            f"{'significant' if entry.significant else 'n.s.'} (alpha={entry.alpha})"
        )
    return 0


def cmd_ablate(args) -> int:
    store = represent.load_dump(args.dump)
    qstore = represent.load_dump(args.query_dump)
    queries = corpus_mod.load_queries(args.queries)
    selected = RepresentationKey.parse(args.key)
    final = RepresentationKey.parse(args.final_key)
    for needed in (selected, final):
        if needed not in store.keys():
            raise MissingVariantDataError(f"dump lacks key {needed}")
    model = projection.load_model(args.model)[0]
    k = args.k or max(200, max((len(q.relevant_doc_ids) for q in queries), default=200))

    # validate the grid before writing anything
    for key in (selected, final):
        has_eos = any(s == EOS_SPAN_ID for _, s, _ in store.records(key))
        has_span = any(s != EOS_SPAN_ID for _, s, _ in store.records(key))
        if not (has_eos and has_span):
            raise MissingVariantDataError(
                f"dump lacks {'EOS' if not has_eos else 'span'} records at key {key}"
            )

    variants: list[tuple[str, RepresentationKey, bool, str]] = []
    for key in (selected, final):
        for token in ("span", "eos"):
            variants.append((f"raw-{token}-{key}", key, False, token))
            if key == selected or store.dim(key) == model.in_dim:
                variants.append((f"mlp-{token}-{key}", key, True, token))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _config_dict(args)
    all_results = {}
    for name, key, use_mlp, token in variants:
        index = _build_index(store, key, model if use_mlp else None, token)
        results = {}
        for query in queries:
            q = _project_query(qstore, key, query.query_id, model if use_mlp else None)
            results[query.query_id] = index.query_topk(q, k)
        fname = out_dir / (name.replace(":", "_") + ".jsonl")
        ranking.save_results(results, fname)
        _write_meta(fname, cfg)
        all_results[name] = results

    report = evaluation.compare_systems(all_results, queries)
    payload = report.to_dict()
    payload["config"] = cfg
    report_path = out_dir / "ablation_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    for system in report.systems:
        print(f"{system.name}\trprec={system.macro_r_precision:.4f}")
    print(f"report -> {report_path}")
    return 0


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typeseek",
        description="Zero-shot typed-entity retrieval pipeline",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("NR_THREADS", "1")),
        help="worker threads (1 guarantees bitwise-reproducible outputs)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check corpus/dump/queries consistency")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dump")
    p.add_argument("--queries")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen-synthetic", help="generate a deterministic synthetic benchmark")
    p.add_argument("--types", type=int, default=20)
    p.add_argument("--mentions", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--keys", default=DEFAULT_SYNTH_KEYS)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--informative-key", default=DEFAULT_INFORMATIVE_KEY)
    p.add_argument("--informative-dim", type=int, default=None)
    p.add_argument("--separation", type=float, default=0.8)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--signal-dim", type=int, default=None)
    p.add_argument("--nuisance-dim", type=int, default=0)
    p.add_argument("--nuisance-scale", type=float, default=1.0)
    p.add_argument("--lexical-hint-rate", type=float, default=0.0)
    p.add_argument("--binary-dump", action="store_true")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("sweep", help="AUC sweep over representation sources")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dump", required=True)
    p.add_argument("--seeds", type=int, default=5, help="number of sampling seeds")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--types", type=int, default=20)
    p.add_argument("--mentions", type=int, default=20)
    p.add_argument("--keys", default=None, help="subset of keys (default: all in dump)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="train the contrastive projection head")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dump", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--query-dump", required=True)
    p.add_argument("--key", default=DEFAULT_INFORMATIVE_KEY)
    p.add_argument("--triplets-per-type", type=int, default=200)
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--hard-negative-fraction", type=float, default=0.1)
    p.add_argument("--hidden-dim", type=int, default=projection.DEFAULT_HIDDEN_DIM)
    p.add_argument("--out-dim", type=int, default=projection.DEFAULT_OUT_DIM)
    p.add_argument("--dropout", type=float, default=projection.DEFAULT_DROPOUT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-types", default=None, help="comma list of held-out types")
    p.add_argument("--holdout", type=int, default=0, help="hold out N seeded-random types")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("index", help="build a cosine vector index from a dump")
    p.add_argument("--corpus", default=None)
    p.add_argument("--dump", required=True)
    p.add_argument("--key", default=DEFAULT_INFORMATIVE_KEY)
    p.add_argument("--model", default=None, help="projection checkpoint (omit for raw vectors)")
    p.add_argument("--token", choices=("span-end", "eos"), default="span-end")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="run type queries against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--query-dump", required=True)
    p.add_argument("--key", default=DEFAULT_INFORMATIVE_KEY)
    p.add_argument("--type", default=None, help="single type name to query")
    p.add_argument("--queries", default=None, help="batch query file")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--min-score", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("baseline-bm25", help="BM25 lexical baseline rankings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline_bm25)

    p = sub.add_parser("evaluate", help="score result files against ground truth")
    p.add_argument("--queries", required=True)
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--metrics", default="rprec,p@50,p@200")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run the key/token/MLP ablation grid")
    p.add_argument("--corpus", default=None)
    p.add_argument("--dump", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--query-dump", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--key", default=DEFAULT_INFORMATIVE_KEY)
    p.add_argument("--final-key", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except TypeseekError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:  # console_scripts target
    sys.exit(main())
