"""Command-line entry point: one subcommand per pipeline stage.

Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from harmlens import __version__
from harmlens.errors import ContractError, UsageError

logger = logging.getLogger("harmlens")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value run configuration file")
    p.add_argument("--out", dest="out_dir", type=Path, help="output directory (default: out)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harmlens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"harmlens {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("ingest", help="snapshots JSONL -> corpus JSONL")
    _common(p)
    p.add_argument("--snapshots", type=Path)
    p.add_argument("--period", help="keep only snapshots fetched in this year")

    p = sub.add_parser("dedup", help="group mirror domains")
    _common(p)
    p.add_argument("--corpus", type=Path)

    p = sub.add_parser("detect", help="scan corpus documents with lexicons")
    _common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--lexicon-dir", type=Path)

    p = sub.add_parser("train", help="train a text classifier")
    _common(p)
    p.add_argument("--train", type=Path, help="labeled examples JSONL")
    p.add_argument("--kind", choices=("nb", "dt"), default="nb")
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--test", type=Path, help="labeled examples JSONL to evaluate on")

    p = sub.add_parser("classify", help="apply a trained model")
    _common(p)
    p.add_argument("--model", type=Path)
    p.add_argument("--corpus", type=Path, help="corpus JSONL to label")
    p.add_argument("--labeled", type=Path, help="labeled JSONL to evaluate on")

    p = sub.add_parser("top-phrases", help="export top discriminative tokens as a lexicon")
    _common(p)
    p.add_argument("--model", type=Path)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--id", dest="lexicon_id", default="nb-top")

    p = sub.add_parser("sessions", help="reconstruct search sessions from an access log")
    _common(p)
    p.add_argument("--log", type=Path)
    p.add_argument("--window", dest="window_seconds", type=int)
    p.add_argument("--lexicon-dir", type=Path)
    p.add_argument("--search-path")
    p.add_argument("--site-host")

    p = sub.add_parser("ages", help="age histograms over sessions")
    _common(p)
    p.add_argument("--sessions", type=Path, help="sessions JSONL from the sessions command")
    p.add_argument("--log", type=Path, help="access log (sessions rebuilt on the fly)")
    p.add_argument("--window", dest="window_seconds", type=int)
    p.add_argument("--lexicon", type=Path, help="target lexicon")
    p.add_argument("--lexicon-dir", type=Path)

    p = sub.add_parser("prevalence", help="FP/FN-corrected content share for one period")
    _common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--k", dest="sample_k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fp", type=float)
    p.add_argument("--fn", type=float)
    p.add_argument("--review", type=Path, help="annotated review sheet to estimate fp/fn from")
    p.add_argument("--period")

    p = sub.add_parser("review-sample", help="CSV sheet for manual annotation")
    _common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--k", dest="review_k", type=int)
    p.add_argument("--seed", type=int)

    for name, help_ in (("filter", "line-delimited JSON filter on stdin/stdout"),
                        ("serve", "run the HTTP filtering service")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--lexicon-dir", type=Path)
        p.add_argument("--mode", choices=("targeted", "strict"))
        p.add_argument("--help-url")
        p.add_argument("--survey-url")
        if name == "filter":
            p.add_argument("--server", help="forward requests to a running service at this URL")
        else:
            p.add_argument("--model", type=Path)
            p.add_argument("--host", default="127.0.0.1")
            p.add_argument("--port", type=int, default=8000)
    return parser


_NON_CONFIG = {"command", "config", "verbose", "kind", "test", "labeled", "k", "lexicon_id",
               "server", "host", "port"}


def _config(args):
    from harmlens.config import load_config

    cfg = load_config(args.config)
    overrides = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    return cfg.with_overrides(**overrides)


def _out(cfg, name: str) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir / name


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def _policy(cfg):
    from harmlens.intervene import FilterPolicy
    from harmlens.lexicon import load_lexicon_dir

    cfg.require("lexicon_dir")
    return FilterPolicy(cfg.mode, cfg.help_url, cfg.survey_url, load_lexicon_dir(cfg.lexicon_dir))


def cmd_ingest(args, cfg) -> int:
    from harmlens.corpus import ingest, write_corpus

    cfg.require("snapshots")
    with open(cfg.snapshots, encoding="utf-8") as fh:
        res = ingest(fh, period=cfg.period)
    with open(_out(cfg, "corpus.jsonl"), "w", encoding="utf-8") as fh:
        write_corpus(res.documents, fh)
    _write_json(_out(cfg, "ingest.json"), {"documents": len(res.documents), "rejects": res.rejects})
    print(f"documents={len(res.documents)} rejects={res.rejects}", file=sys.stderr)
    return 0


def cmd_dedup(args, cfg) -> int:
    from harmlens.corpus import read_corpus, write_corpus
    from harmlens.dedup import canonical_documents, group_duplicates, write_group_report

    cfg.require("corpus")
    docs = read_corpus(cfg.corpus)
    groups = group_duplicates(docs)
    with open(_out(cfg, "groups.csv"), "w", encoding="utf-8") as fh:
        write_group_report(groups, fh)
    with open(_out(cfg, "canonical.jsonl"), "w", encoding="utf-8") as fh:
        write_corpus(canonical_documents(docs, groups), fh)
    print(f"domains={len(docs)} sites={len(groups)}", file=sys.stderr)
    return 0


def _matchers(cfg, single_category: str | None = None):
    from harmlens.lexicon import compile_lexicon, load_lexicon, load_lexicon_dir

    if cfg.lexicon is not None:
        cfg.require("lexicon")
        lex = load_lexicon(cfg.lexicon)
        return {lex.category: compile_lexicon(lex)}
    if cfg.lexicon_dir is not None:
        cfg.require("lexicon_dir")
        return load_lexicon_dir(cfg.lexicon_dir)
    raise UsageError("one of --lexicon or --lexicon-dir is required")


def cmd_detect(args, cfg) -> int:
    from harmlens.corpus import read_corpus

    cfg.require("corpus")
    matchers = _matchers(cfg)
    counts = {c: 0 for c in matchers}
    docs = read_corpus(cfg.corpus)
    with open(_out(cfg, "detections.jsonl"), "w", encoding="utf-8") as fh:
        for doc in docs:
            row = {"domain": doc.domain, "categories": {}}
            for cat, m in matchers.items():
                res = m.match_text(doc.text)
                if res.matched:
                    counts[cat] += 1
                    row["categories"][cat] = [list(h) for h in res.hits]
            row["matched"] = bool(row["categories"])
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    _write_json(_out(cfg, "detect_summary.json"), {"documents": len(docs), "matched": counts})
    return 0


def cmd_train(args, cfg) -> int:
    from harmlens.classifier import (
        POSITIVE, evaluate, predict, read_examples, save_model, train_dt, train_nb,
    )

    cfg.require("train")
    examples = read_examples(cfg.train)
    pos = [e for e in examples if e.label == POSITIVE]
    neg = [e for e in examples if e.label != POSITIVE]
    if args.kind == "nb":
        model = train_nb(pos, neg, cfg.alpha)
    else:
        model = train_dt(pos, neg, cfg.max_depth)
    save_model(model, _out(cfg, "model.json"))
    if args.test is not None:
        if not args.test.exists():
            raise ContractError(f"input test does not exist: {args.test}")
        report = evaluate(lambda t: predict(model, t), read_examples(args.test))
        _write_json(_out(cfg, "eval.json"), report.to_dict())
        print(f"accuracy={report.accuracy:.4f}", file=sys.stderr)
    return 0


def cmd_classify(args, cfg) -> int:
    from harmlens.classifier import evaluate, load_model, predict, read_examples
    from harmlens.corpus import read_corpus

    cfg.require("model")
    if cfg.corpus is None and args.labeled is None:
        raise UsageError("classify needs --corpus or --labeled")
    model = load_model(cfg.model)
    if cfg.corpus is not None:
        cfg.require("corpus")
        with open(_out(cfg, "predictions.jsonl"), "w", encoding="utf-8") as fh:
            for doc in read_corpus(cfg.corpus):
                label, score = predict(model, doc.text)
                fh.write(json.dumps({"domain": doc.domain, "label": label, "score": score}) + "\n")
    if args.labeled is not None:
        if not args.labeled.exists():
            raise ContractError(f"input labeled does not exist: {args.labeled}")
        report = evaluate(lambda t: predict(model, t), read_examples(args.labeled))
        _write_json(_out(cfg, "eval.json"), report.to_dict())
        print(f"accuracy={report.accuracy:.4f}", file=sys.stderr)
    return 0


def cmd_top_phrases(args, cfg) -> int:
    from harmlens.classifier import NBModel, features_to_lexicon, load_model, top_features

    cfg.require("model")
    model = load_model(cfg.model)
    if not isinstance(model, NBModel):
        raise ContractError("top-phrases requires a naive Bayes model")
    rows = top_features(model, args.k)
    _out(cfg, "top_phrases.txt").write_text(features_to_lexicon(rows, args.lexicon_id), encoding="utf-8")
    return 0


def _load_sessions(cfg):
    from harmlens.sessions import iter_sessions, parse_log, reconstruct_sessions

    if cfg.sessions is not None:
        cfg.require("sessions")
        with open(cfg.sessions, encoding="utf-8") as fh:
            return list(iter_sessions(fh)), None
    cfg.require("log")
    with open(cfg.log, encoding="utf-8", errors="replace") as fh:
        parsed = parse_log(fh, cfg.search_path, cfg.site_host)
    return reconstruct_sessions(parsed.records, cfg.window_seconds), parsed


def cmd_sessions(args, cfg) -> int:
    from harmlens.sessions import aggregate, write_sessions

    cfg.require("log")
    sessions, parsed = _load_sessions(cfg)
    with open(_out(cfg, "sessions.jsonl"), "w", encoding="utf-8") as fh:
        write_sessions(sessions, fh)
    matchers = {}
    if cfg.lexicon_dir is not None:
        from harmlens.lexicon import load_lexicon_dir
        from harmlens.sessions import SESSION_CATEGORIES

        cfg.require("lexicon_dir")
        matchers = {c: m for c, m in load_lexicon_dir(cfg.lexicon_dir).items() if c in SESSION_CATEGORIES}
    metrics = aggregate(sessions, matchers)
    payload = metrics.to_dict()
    payload["records"] = len(parsed.records)
    payload["skipped"] = dict(sorted(parsed.skipped.items()))
    payload["window_seconds"] = cfg.window_seconds
    _write_json(_out(cfg, "metrics.json"), payload)
    with open(_out(cfg, "metrics.csv"), "w", encoding="utf-8") as fh:
        metrics.write_csv(fh)
    print(f"records={len(parsed.records)} sessions={len(sessions)} skipped={parsed.skipped_total}",
          file=sys.stderr)
    return 0


def cmd_ages(args, cfg) -> int:
    from harmlens.ages import age_histogram

    if cfg.sessions is None and cfg.log is None:
        raise UsageError("ages needs --sessions or --log")
    sessions, _ = _load_sessions(cfg)
    target = None
    if cfg.lexicon is not None or cfg.lexicon_dir is not None:
        target = _matchers(cfg).get("target")
        if target is None:
            raise ContractError("ages: no target-category lexicon supplied")
    hist = age_histogram(sessions, target)
    with open(_out(cfg, "ages.csv"), "w", encoding="utf-8") as fh:
        hist.write_exact_csv(fh)
    with open(_out(cfg, "age_terms.csv"), "w", encoding="utf-8") as fh:
        hist.write_broad_csv(fh)
    return 0


def cmd_prevalence(args, cfg) -> int:
    from harmlens.corpus import read_corpus
    from harmlens.lexicon import compile_lexicon, load_lexicon
    from harmlens.prevalence import estimate_rates, read_review_labels, yearly_pipeline

    cfg.require("corpus", "lexicon")
    docs = read_corpus(cfg.corpus)
    matcher = compile_lexicon(load_lexicon(cfg.lexicon))
    fp, fn = cfg.fp, cfg.fn
    rates = None
    if fp is None or fn is None:
        if cfg.review is None:
            raise UsageError("prevalence needs --fp and --fn, or --review with an annotated sheet")
        cfg.require("review")
        with open(cfg.review, encoding="utf-8") as fh:
            labels = read_review_labels(fh)
        rates = estimate_rates(labels, docs, matcher)
        fp = rates.fp_rate if fp is None else fp
        fn = rates.fn_rate if fn is None else fn
    est = yearly_pipeline(docs, matcher, cfg.sample_k, cfg.seed, fp, fn, period=cfg.period or "")
    payload = est.to_dict()
    if rates is not None:
        payload["rate_counts"] = vars(rates)
    _write_json(_out(cfg, "estimate.json"), payload)
    print(f"corrected_share={est.corrected_share:.6f}", file=sys.stderr)
    return 0


def cmd_review_sample(args, cfg) -> int:
    from harmlens.corpus import read_corpus
    from harmlens.prevalence import manual_sample, write_review_sheet

    cfg.require("corpus")
    rows = manual_sample(read_corpus(cfg.corpus), cfg.review_k, cfg.seed)
    with open(_out(cfg, "review_sheet.csv"), "w", encoding="utf-8", newline="") as fh:
        write_review_sheet(rows, fh)
    return 0


def _forward(server: str, inp, out) -> int:
    import httpx

    url = server.rstrip("/") + "/v1/decide"
    with httpx.Client(timeout=10.0) as client:
        try:
            for line in inp:
                if not line.strip():
                    continue
                try:
                    req = json.loads(line)
                    ok = isinstance(req, dict) and isinstance(req.get("id"), str) \
                        and isinstance(req.get("query"), str)
                except json.JSONDecodeError:
                    ok = False
                if not ok:
                    resp = {"id": None, "action": "Error", "reason": "malformed request"}
                else:
                    r = client.post(url, json={"id": req["id"], "query": req["query"]})
                    r.raise_for_status()
                    resp = r.json()
                out.write(json.dumps(resp, ensure_ascii=False) + "\n")
                out.flush()
        except (OSError, UnicodeDecodeError):
            return 2
        except httpx.HTTPError as exc:
            raise ContractError(f"filter service at {server} failed: {exc}") from exc
    return 0


def cmd_filter(args, cfg) -> int:
    from harmlens.intervene import serve_stream

    if args.server:
        return _forward(args.server, sys.stdin, sys.stdout)
    return serve_stream(sys.stdin, sys.stdout, _policy(cfg))


def cmd_serve(args, cfg) -> int:
    import uvicorn

    from harmlens.classifier import load_model
    from harmlens.service import create_app

    model = None
    if cfg.model is not None:
        cfg.require("model")
        model = load_model(cfg.model)
    uvicorn.run(create_app(_policy(cfg), model), host=args.host, port=args.port)
    return 0


COMMANDS = {
    "ingest": cmd_ingest, "dedup": cmd_dedup, "detect": cmd_detect, "train": cmd_train,
    "classify": cmd_classify, "top-phrases": cmd_top_phrases, "sessions": cmd_sessions,
    "ages": cmd_ages, "prevalence": cmd_prevalence, "review-sample": cmd_review_sample,
    "filter": cmd_filter, "serve": cmd_serve,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"harmlens {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ContractError, OSError) as exc:
        print(f"harmlens {args.command}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
