"""Command-line entry point.

One binary, six subcommands:

  stats          corpus statistics
  build-index    extract per-document topics and write the index file
  extend-labels  add ruk triples and topics to inserted turns' gold states
  retrieve       rank documents for a state (topic) or context (tfidf, bm25)
  query-db       run a belief state against the database
  evaluate       score a prediction file against a gold corpus

stdout carries exactly one JSON payload per invocation; all diagnostics go
to stderr.  Every payload embeds a run manifest: sha256 of each input file,
the effective configuration, and its fingerprint.  Errors print a
structured ``{"error": {...}}`` object and exit 1.

Configuration is a JSON file (flag --config, or the HYBRIDKM_CONFIG
environment variable) with four sections; unknown keys are rejected:

  paths       corpus, docs, db, ontology, canon_map, stopwords
  thresholds  restaurant, hotel, taxi, train
  retrieval   method, k, k1, b, entity_fuzzy_threshold
  metrics     delex, bleu_smoothing

Command-line flags override config values.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .belief import extend_label, parse_state
from .corpus import (
    DialogCorpus,
    TurnKind,
    corpus_stats,
    load_corpus,
    load_database,
    load_document_base,
    load_ontology,
    save_corpus,
    unresolvable_doc_refs,
)
from .errors import HybridKmError, MissingIndexError, ParseError, SchemaError
from .kb_structured import encode_match, query
from .kb_unstructured import (
    DEFAULT_TOP_K,
    DomainThresholds,
    build_index,
    canonical_dumps,
    fingerprint_matches,
    load_index,
    load_stopwords,
    save_index,
)
from .metrics import evaluate, load_predictions
from .retrieval import bm25_retrieve, tfidf_retrieve, topic_match_retrieve

ENV_CONFIG = "HYBRIDKM_CONFIG"

logger = logging.getLogger("hybridkm")

_DEFAULT_CONFIG: dict = {
    "paths": {
        "corpus": None,
        "docs": None,
        "db": None,
        "ontology": None,
        "canon_map": None,
        "stopwords": None,
    },
    "thresholds": {"restaurant": 2.3, "hotel": 2.7, "taxi": 6.9, "train": 7.3},
    "retrieval": {
        "method": "topic",
        "k": 5,
        "k1": 1.5,
        "b": 0.75,
        "entity_fuzzy_threshold": 0.8,
    },
    "metrics": {"delex": True, "bleu_smoothing": True},
}


def load_config(path: str | None) -> dict:
    """Defaults overlaid with the config file, rejecting unknown keys."""
    config = copy.deepcopy(_DEFAULT_CONFIG)
    if not path:
        return config
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: config must be a JSON object")
    for section, values in data.items():
        if section not in config:
            raise SchemaError(f"{path}: unknown config section {section!r}")
        if not isinstance(values, dict):
            raise SchemaError(f"{path}: config section {section!r} must be an object")
        for key, value in values.items():
            if key not in config[section]:
                raise SchemaError(f"{path}: unknown config key {section}.{key}")
            config[section][key] = value
    return config


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_manifest(config: dict, inputs: dict[str, object], seed: int | None = None) -> dict:
    manifest = {
        "inputs": {
            role: {"path": str(p), "sha256": _sha256(p)} for role, p in sorted(inputs.items())
        },
        "config": config,
        "config_fingerprint": hashlib.sha256(canonical_dumps(config).encode("utf-8")).hexdigest(),
    }
    if seed is not None:
        manifest["seed"] = seed
    return manifest


def _resolve(flag_value, config: dict, key: str, required: bool = True):
    value = flag_value if flag_value is not None else config["paths"][key]
    if value is None and required:
        raise SchemaError(f"no {key} path given (use --{key} or config paths.{key})")
    return value


def _thresholds(config: dict) -> DomainThresholds:
    return DomainThresholds(**config["thresholds"])


def _stopwords(config: dict) -> frozenset[str]:
    return load_stopwords(config["paths"]["stopwords"])


def _load_canon_map(path) -> dict[str, str]:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise SchemaError(f"{path}: canon map must be a JSON object of strings")
    return data


def cmd_stats(args, config: dict) -> dict:
    corpus_path = _resolve(args.corpus, config, "corpus")
    ontology_path = _resolve(args.ontology, config, "ontology", required=False)
    inputs: dict[str, object] = {"corpus": corpus_path}
    ontology = None
    if ontology_path:
        ontology = load_ontology(ontology_path)
        inputs["ontology"] = ontology_path
    corpus = load_corpus(corpus_path, ontology=ontology)
    stats = corpus_stats(corpus)
    return {
        "dialogs_per_split": dict(stats.dialogs_per_split),
        "n_dialogs": len(corpus),
        "avg_turns": stats.avg_turns,
        "slot_types": stats.slot_types,
        "slot_values": stats.slot_values,
        "manifest": make_manifest(config, inputs, args.seed),
    }


def cmd_build_index(args, config: dict) -> dict:
    docs_path = _resolve(args.docs, config, "docs")
    base = load_document_base(docs_path)
    index = build_index(base, thresholds=_thresholds(config), stopwords=_stopwords(config))
    manifest = make_manifest(config, {"docs": docs_path}, args.seed)
    save_index(index, args.out, manifest=manifest)
    logger.info("indexed %d documents -> %s", len(base), args.out)
    return {
        "documents": len(base),
        "indexed": len(index.topics),
        "config_fingerprint": index.config_fingerprint,
        "out": str(args.out),
        "manifest": manifest,
    }


def cmd_extend_labels(args, config: dict) -> dict:
    corpus_path = _resolve(args.corpus, config, "corpus")
    docs_path = _resolve(args.docs, config, "docs")
    if not Path(args.index).exists():
        raise MissingIndexError(f"index file not found: {args.index} (run build-index first)")
    corpus = load_corpus(corpus_path)
    base = load_document_base(docs_path)
    index = load_index(args.index)

    missing = unresolvable_doc_refs(corpus, base)
    if missing:
        offenders = ", ".join(f"{d}/turn {t} -> {doc!r}" for d, t, doc in missing)
        raise SchemaError(f"unresolvable document references: {offenders}")
    unindexed = sorted(
        {
            turn.doc_id
            for dialog in corpus
            for turn in dialog.turns
            if turn.kind is TurnKind.INSERTED and not index.topic(turn.doc_id)
        }
    )
    if unindexed:
        raise MissingIndexError(f"index has no topics for documents: {unindexed} (rebuild the index)")

    extended = 0
    new_dialogs = {}
    for dialog in corpus:
        turns = []
        for turn in dialog.turns:
            if turn.kind is TurnKind.INSERTED:
                doc = base.documents[turn.doc_id]
                state = extend_label(turn.state, (doc, index.topic(turn.doc_id)))
                turns.append(replace(turn, state=state))
                extended += 1
            else:
                turns.append(turn)
        new_dialogs[dialog.id] = replace(dialog, turns=tuple(turns))
    new_corpus = DialogCorpus(
        dialogs=new_dialogs, schema_version=corpus.schema_version, ontology=corpus.ontology
    )
    manifest = make_manifest(
        config, {"corpus": corpus_path, "docs": docs_path, "index": args.index}, args.seed
    )
    save_corpus(new_corpus, args.out, manifest=manifest)
    logger.info("extended %d inserted turns -> %s", extended, args.out)
    return {"extended_turns": extended, "out": str(args.out), "manifest": manifest}


def cmd_retrieve(args, config: dict) -> dict:
    docs_path = _resolve(args.docs, config, "docs")
    base = load_document_base(docs_path)
    method = args.method or config["retrieval"]["method"]
    k = args.k if args.k is not None else config["retrieval"]["k"]
    inputs: dict[str, object] = {"docs": docs_path}

    if method == "topic":
        if args.state is None:
            raise SchemaError("retrieve --method topic needs --state")
        if args.index is None:
            raise SchemaError("retrieve --method topic needs --index")
        if not Path(args.index).exists():
            raise MissingIndexError(f"index file not found: {args.index} (run build-index first)")
        index = load_index(args.index)
        inputs["index"] = args.index
        if not fingerprint_matches(index, _thresholds(config), DEFAULT_TOP_K, _stopwords(config)):
            logger.warning(
                "index %s was built under a different configuration "
                "(fingerprint mismatch); results may be stale",
                args.index,
            )
        state = parse_state(args.state)
        result = topic_match_retrieve(
            base,
            index,
            state,
            k=k,
            fuzzy_threshold=config["retrieval"]["entity_fuzzy_threshold"],
        )
        ranking = list(result.ranking) if result is not None else []
    elif method in ("tfidf", "bm25"):
        if not args.context:
            raise SchemaError(f"retrieve --method {method} needs at least one --context")
        if method == "tfidf":
            result = tfidf_retrieve(base, args.context, domain=args.domain, k=k)
        else:
            result = bm25_retrieve(
                base,
                args.context,
                domain=args.domain,
                k=k,
                k1=config["retrieval"]["k1"],
                b=config["retrieval"]["b"],
            )
        ranking = list(result.ranking)
    else:
        raise SchemaError(f"unknown retrieval method {method!r}")

    return {
        "method": method,
        "best": ranking[0][0] if ranking else None,
        "ranking": [[doc_id, score] for doc_id, score in ranking],
        "manifest": make_manifest(config, inputs, args.seed),
    }


def cmd_query_db(args, config: dict) -> dict:
    db_path = _resolve(args.db, config, "db")
    ontology_path = _resolve(args.ontology, config, "ontology", required=False)
    inputs: dict[str, object] = {"db": db_path}
    ontology = None
    if ontology_path:
        ontology = load_ontology(ontology_path)
        inputs["ontology"] = ontology_path
    db = load_database(db_path, ontology=ontology)
    state = parse_state(args.state)
    result = query(db, state, args.domain)
    vector = encode_match(result)
    return {
        "domain": args.domain,
        "count": result.count,
        "booking_available": result.booking_available,
        "match_vector": list(vector.bits),
        "entities": sorted(e.identity() for e in result.entries),
        "manifest": make_manifest(config, inputs, args.seed),
    }


def cmd_evaluate(args, config: dict) -> dict:
    corpus_path = _resolve(args.corpus, config, "corpus")
    db_path = _resolve(args.db, config, "db", required=False)
    ontology_path = _resolve(args.ontology, config, "ontology", required=False)
    canon_path = config["paths"]["canon_map"]
    inputs: dict[str, object] = {"corpus": corpus_path, "predictions": args.predictions}

    ontology = None
    if ontology_path:
        ontology = load_ontology(ontology_path)
        inputs["ontology"] = ontology_path
    db = None
    if db_path:
        db = load_database(db_path, ontology=ontology)
        inputs["db"] = db_path
    canon_map = None
    if canon_path:
        canon_map = _load_canon_map(canon_path)
        inputs["canon_map"] = canon_path
    if db is not None and ontology is None:
        logger.warning("database given without ontology; inform/success stay 0")

    corpus = load_corpus(corpus_path, ontology=ontology)
    predictions = load_predictions(args.predictions)
    delex = config["metrics"]["delex"]
    if args.delex:
        delex = True
    elif args.lexical:
        delex = False
    report = evaluate(
        corpus,
        predictions,
        db=db,
        ontology=ontology,
        delex=delex,
        bleu_smoothing=config["metrics"]["bleu_smoothing"],
        canon_map=canon_map,
    )
    payload = report.to_dict()
    payload["manifest"] = make_manifest(config, inputs, args.seed)
    if args.report:
        Path(args.report).write_text(
            json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        logger.info("report written to %s", args.report)
    return payload


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridkm",
        description="Hybrid knowledge management and evaluation for task-oriented dialog",
    )
    parser.add_argument(
        "--config", default=None, help=f"config JSON path (default: ${ENV_CONFIG})"
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="reserved; recorded in the run manifest"
    )
    parser.add_argument("--quiet", action="store_true", help="suppress informational logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="print corpus statistics")
    p.add_argument("--corpus")
    p.add_argument("--ontology")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("build-index", help="extract topics and write the index file")
    p.add_argument("--docs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("extend-labels", help="add ruk triples and topics to inserted turns")
    p.add_argument("--corpus")
    p.add_argument("--docs")
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extend_labels)

    p = sub.add_parser("retrieve", help="rank documents for a state or context")
    p.add_argument("--docs")
    p.add_argument("--index")
    p.add_argument("--state", help="flat belief state (topic method)")
    p.add_argument(
        "--context", action="append", help="context utterance (tfidf/bm25); repeatable"
    )
    p.add_argument("--method", choices=("topic", "tfidf", "bm25"))
    p.add_argument("--k", type=int)
    p.add_argument("--domain", help="restrict tfidf/bm25 to one domain")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("query-db", help="run a belief state against the database")
    p.add_argument("--db")
    p.add_argument("--ontology")
    p.add_argument("--state", required=True, help="flat belief state")
    p.add_argument("--domain", required=True)
    p.set_defaults(func=cmd_query_db)

    p = sub.add_parser("evaluate", help="score a prediction file against a gold corpus")
    p.add_argument("--corpus")
    p.add_argument("--predictions", required=True)
    p.add_argument("--db")
    p.add_argument("--ontology")
    p.add_argument("--report", help="also write the report JSON here")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--delex", action="store_true", default=False)
    group.add_argument("--lexical", action="store_true", default=False)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        config = load_config(args.config or os.environ.get(ENV_CONFIG))
        payload = args.func(args, config)
    except (HybridKmError, OSError, ValueError) as exc:
        logger.error("%s", exc)
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}, indent=2))
        return 1
    print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
