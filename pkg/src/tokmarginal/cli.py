"""Command-line entry point: ``tokmarginal <command> ...``.

Commands: evaluate, entropy, sample, caching, correlate, curve, sweep, train-lm.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

from . import analysis
from .estimators import ONE_BEST, DocumentResult, perplexity
from .evaluation import MODES, EvalConfig, evaluate_document
from .lattice import build_lattice, lattice_entropy, viterbi_nbest
from .reports import read_jsonl, write_csv, write_jsonl
from .sampler import Mode, build_consistent_proposal, draw, make_rng
from .scorer import CacheNGram, ExternalScorer, NGramModel, train_ngram
from .vocab import count_words, load_vocab


class CliError(RuntimeError):
    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


def load_corpus(path: str) -> list[str]:
    """One document per non-empty line, or one document per file in a directory."""
    p = Path(path)
    if p.is_dir():
        return [f.read_text(encoding="utf-8") for f in sorted(p.iterdir()) if f.is_file()]
    with open(p, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def _datasets(paths: list[str]) -> list[tuple[str, list[str]]]:
    return [(Path(p).stem, load_corpus(p)) for p in paths]


def make_scorer(spec: str, vocab, train_corpus: Optional[str] = None):
    kind, _, arg = spec.partition(":")
    if kind in ("builtin", "builtin-cache"):
        if "=" in arg:
            params = dict(kv.split("=", 1) for kv in arg.split(","))
            if train_corpus is None:
                raise CliError("builtin:N=..,d=.. needs --train-corpus")
            model = train_on_one_best(load_corpus(train_corpus), vocab,
                                      int(params.get("N", 3)), float(params.get("d", 0.75)))
        else:
            model = NGramModel.from_json(Path(arg).read_text(encoding="utf-8"))
        return CacheNGram(model) if kind == "builtin-cache" else model
    if kind == "exec":
        return ExternalScorer.spawn(arg)
    if kind == "tcp":
        host, _, port = arg.rpartition(":")
        return ExternalScorer.connect(host or "127.0.0.1", int(port))
    raise CliError(f"unknown scorer spec {spec!r}; use builtin:, exec: or tcp:")


def train_on_one_best(documents: list[str], vocab, order: int, discount: float) -> NGramModel:
    corpus = [viterbi_nbest(build_lattice(d, vocab), 1)[0].pieces for d in documents]
    return train_ngram(corpus, order, discount, vocab.tokens)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "workers")}


def _eval_config(args) -> EvalConfig:
    return EvalConfig(args.mode, args.samples, args.temperature, args.consistent, args.seed)


def _run_docs(docs, fn, workers: int):
    if workers <= 1:
        return [fn(i, d) for i, d in docs]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda x: fn(*x), docs))


def _indexed(datasets):
    out, i = [], 0
    for name, docs in datasets:
        for d in docs:
            out.append((i, (name, d)))
            i += 1
    return out


def _evaluate(args, scorer, vocab):
    datasets = _datasets(args.corpus)
    config = _eval_config(args)

    def one(doc_id, item):
        name, text = item
        try:
            ev = evaluate_document(doc_id, text, vocab, scorer, config)
        except Exception as exc:
            raise CliError(str(exc), doc_id=doc_id, dataset=name,
                           error_type=type(exc).__name__) from exc
        return name, ev

    return datasets, _run_docs(_indexed(datasets), one, args.workers)


def cmd_evaluate(args) -> None:
    vocab = load_vocab(args.vocab)
    scorer = make_scorer(args.scorer, vocab, args.train_corpus)
    try:
        datasets, evs = _evaluate(args, scorer, vocab)
    finally:
        if hasattr(scorer, "close"):
            scorer.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _config(args)
    write_jsonl(out / "results.jsonl",
                (dict(ev.result.to_dict(), dataset=name) for name, ev in evs), cfg)
    rows = []
    for name, _ in datasets:
        res = [ev.result for n, ev in evs if n == name]
        if not res:
            continue
        one = perplexity(res, ONE_BEST)
        marg = perplexity(res, args.mode)
        rows.append([name, one, marg, 100.0 * (one - marg) / one])
    write_csv(out / "aggregate.csv", ["dataset", ONE_BEST, args.mode, "relative_improvement_pct"],
              rows, cfg)


def cmd_entropy(args) -> None:
    vocab = load_vocab(args.vocab)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for doc_id, (name, text) in _indexed(_datasets(args.corpus)):
        lat = build_lattice(text, vocab, args.temperature)
        h = lattice_entropy(lat, bits=args.bits)
        n = count_words(text)
        rows.append([doc_id, name, h, n, h / n if n else None])
    unit = "bits" if args.bits else "nats"
    write_csv(out / "entropy.csv", ["doc_id", "dataset", f"entropy_{unit}", "whitespace_tokens",
                                    f"entropy_per_token_{unit}"], rows, _config(args))


def cmd_sample(args) -> None:
    vocab = load_vocab(args.vocab)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for doc_id, (name, text) in _indexed(_datasets(args.corpus)):
        if args.consistent:
            prop = build_consistent_proposal(text, vocab, args.temperature)
            lat, expand = prop.lattice, prop.expand
        else:
            lat, expand = build_lattice(text, vocab, args.temperature), (lambda t: t)
        if args.mode == "nbest":
            toks = [(expand(t), None) for t in viterbi_nbest(lat, args.samples)]
            meta = {"exhausted": len(toks) < args.samples, "kappa": None}
        else:
            ss = draw(lat, Mode(args.mode), args.samples, make_rng(args.seed, doc_id, args.mode))
            toks = [(expand(t), g) for t, g in ss.samples]
            meta = {"exhausted": ss.exhausted, "kappa": ss.kappa}
        records.append(dict(meta, doc_id=doc_id, dataset=name, samples=[
            {"tokens": list(t.pieces), "log_q_cond": t.log_q_cond, "gumbel_key": g}
            for t, g in toks]))
    write_jsonl(out / "samples.jsonl", records, _config(args))


def cmd_caching(args) -> None:
    vocab = load_vocab(args.vocab)
    scorer = make_scorer(args.scorer, vocab, args.train_corpus)
    try:
        datasets, evs = _evaluate(args, scorer, vocab)
        docs = [text for _, d in datasets for text in d]
        table = analysis.caching_analysis(docs, [ev.tokenisations for _, ev in evs], scorer)
    finally:
        if hasattr(scorer, "close"):
            scorer.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[subset, cls.value, cell.mean_loss, cell.count]
            for (subset, cls), cell in table.items()]
    write_csv(out / "table3_caching.csv", ["subset", "class", "mean_loss_nats", "count"], rows,
              _config(args))


def cmd_correlate(args) -> None:
    results = [DocumentResult.from_dict(r) for r in read_jsonl(args.results)]
    corr = analysis.entropy_gap_correlation(results, args.estimator)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[r.doc_id, x, y] for r, (x, y) in zip(results, corr.pairs)]
    cfg = dict(_config(args), spearman_r=corr.r)
    write_csv(out / "fig3_scatter.csv", ["doc_id", "entropy_per_token", "gap_per_token"], rows, cfg)
    print(json.dumps({"spearman_r": corr.r, "n": len(rows)}))


def cmd_curve(args) -> None:
    vocab = load_vocab(args.vocab)
    scorer = make_scorer(args.scorer, vocab, args.train_corpus)
    args.mode = "nbest"
    try:
        _, evs = _evaluate(args, scorer, vocab)
    finally:
        if hasattr(scorer, "close"):
            scorer.close()
    samples, counts = analysis.nbest_curve_inputs([ev for _, ev in evs])
    by_q = analysis.sample_contribution_curve(samples, counts, "by_q")
    by_p = analysis.sample_contribution_curve(samples, counts, "by_p")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[m + 1, float(q), float(p)] for m, (q, p) in enumerate(zip(by_q, by_p))]
    write_csv(out / "fig4_curve.csv", ["n", "ppl_by_q", "ppl_by_p"], rows, _config(args))


def cmd_sweep(args) -> None:
    vocab = load_vocab(args.vocab)
    scorer = make_scorer(args.scorer, vocab, args.train_corpus)
    temps = [float(t) for t in args.temperatures.split(",")]
    docs = [text for _, d in _datasets(args.corpus) for text in d]
    try:
        rows = analysis.temperature_sweep(docs, vocab, scorer, temps, args.mode, args.samples,
                                          args.consistent, args.seed, args.workers)
    finally:
        if hasattr(scorer, "close"):
            scorer.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "fig2_sweep.csv",
              ["temperature", "inv_temperature", "perplexity", "nbest_perplexity", "pct_diff"],
              [[r.temperature, 1.0 / r.temperature, r.perplexity, r.nbest_perplexity,
                r.percent_difference] for r in rows], _config(args))


def cmd_train_lm(args) -> None:
    vocab = load_vocab(args.vocab)
    docs = [text for _, d in _datasets(args.corpus) for text in d]
    model = train_on_one_best(docs, vocab, args.order, args.discount)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(model.to_json(), encoding="utf-8")


def _positive_float(s: str) -> float:
    v = float(s)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tokmarginal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scorer=False, sampling=False, seed_required=True):
        p.add_argument("--vocab", required=True)
        p.add_argument("--corpus", required=True, action="append",
                       help="one document per line, or a directory of files; repeatable")
        p.add_argument("--out", required=True)
        p.add_argument("--workers", type=_positive_int, default=1)
        if scorer:
            p.add_argument("--scorer", required=True,
                           help="builtin:<model.json> | builtin:N=3,d=0.75 | "
                                "builtin-cache:<model.json> | exec:<command> | tcp:<host:port>")
            p.add_argument("--train-corpus", default=None)
        if sampling:
            p.add_argument("--mode", choices=MODES, default="nbest")
            p.add_argument("--samples", type=_positive_int, default=128)
            p.add_argument("--temperature", type=_positive_float, default=1.0)
            p.add_argument("--consistent", action="store_true")
            p.add_argument("--seed", type=int, required=seed_required)

    p = sub.add_parser("evaluate", help="marginal likelihood per document")
    common(p, scorer=True, sampling=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("entropy", help="segmentation lattice entropy per document")
    common(p)
    p.add_argument("--temperature", type=_positive_float, default=1.0)
    p.add_argument("--bits", action="store_true")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("sample", help="dump sampled tokenisations")
    common(p, sampling=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("caching", help="loss of repeated words by tokenisation match")
    common(p, scorer=True, sampling=True)
    p.set_defaults(func=cmd_caching)

    p = sub.add_parser("curve", help="n-best contribution curve ordered by Q and by P")
    common(p, scorer=True)
    p.add_argument("--samples", type=_positive_int, default=128)
    p.add_argument("--consistent", action="store_true")
    p.set_defaults(func=cmd_curve, temperature=1.0, seed=0)

    p = sub.add_parser("sweep", help="perplexity vs temperature against the n-best baseline")
    common(p, scorer=True, sampling=True)
    p.add_argument("--temperatures", required=True, help="comma-separated, e.g. 0.25,0.5,1")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("correlate", help="Spearman r of entropy vs marginal gap")
    p.add_argument("--results", required=True)
    p.add_argument("--estimator", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("train-lm", help="train the built-in n-gram model on 1-best tokenisations")
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", required=True, action="append")
    p.add_argument("--order", type=_positive_int, default=3)
    p.add_argument("--discount", type=float, default=0.75)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_lm)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        report = {"error": exc.context.get("error_type", "CliError"), "message": str(exc)}
        report.update({k: v for k, v in exc.context.items() if k != "error_type"})
        print(json.dumps(report), file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
