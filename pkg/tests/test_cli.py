import json
import subprocess
import sys

import pytest

from helpers import AB
from tokmarginal.cli import main
from tokmarginal.evaluation import EvalConfig, evaluate_corpus
from tokmarginal.reports import FORMAT_VERSION, read_csv, read_jsonl
from tokmarginal.scorer import UniformScorer, train_ngram
from tokmarginal.vocab import Vocab, dump_vocab

ECHO = f"exec:{sys.executable} -m tokmarginal.scorer.echo"


@pytest.fixture
def files(tmp_path):
    vocab = tmp_path / "vocab.tsv"
    vocab.write_text(dump_vocab(Vocab(AB)), encoding="utf-8")
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("ab ab\nb a ab\n", encoding="utf-8")
    train = tmp_path / "train.txt"
    train.write_text("ab ab b\na ab\nab b a ab\n", encoding="utf-8")
    return tmp_path, str(vocab), str(corpus), str(train)


def _run(*argv):
    return main([str(a) for a in argv])


class TestEvaluation:
    def test_config_validation(self):
        for bad in (dict(mode="x"), dict(k=0), dict(temperature=0.0)):
            with pytest.raises(ValueError):
                EvalConfig(**bad)

    def test_nbest_at_least_one_best(self, ab):
        docs = ["ab ab", "b a ab", "ab"]
        sc = train_ngram([["ab", "ab"], ["a", "b"]], 2, 0.5, ab.tokens)
        for ev in evaluate_corpus(docs, ab, sc, EvalConfig("nbest", 4)):
            assert ev.result.log_p_marginal["nbest"] >= ev.result.log_p_best
            assert ev.result.marginal_gap_per_token["nbest"] >= 0

    def test_workers_do_not_change_results(self, ab):
        docs = ["ab ab", "b a ab", "ab", "a b ab ab"]
        cfg = EvalConfig("wor", 2, 1.0, False, 5)
        serial = evaluate_corpus(docs, ab, UniformScorer(4), cfg, workers=1)
        parallel = evaluate_corpus(docs, ab, UniformScorer(4), cfg, workers=3)
        assert [e.result for e in serial] == [e.result for e in parallel]

    def test_provenance(self, ab):
        (ev,) = evaluate_corpus(["ab ab"], ab, UniformScorer(4), EvalConfig("wr", 3, 2.0, True, 7))
        prov = ev.result.provenance
        assert (prov["mode"], prov["k"], prov["temperature"], prov["seed"]) == ("wr", 3, 2.0, 7)
        assert prov["consistent"] and "jensen" in prov["diagnostics"]


class TestCli:
    def test_evaluate_nbest(self, files):
        tmp, vocab, corpus, train = files
        out = tmp / "out"
        assert _run("evaluate", "--vocab", vocab, "--corpus", corpus, "--scorer", "builtin:N=2,d=0.5",
                    "--train-corpus", train, "--mode", "nbest", "--samples", 4, "--seed", 0,
                    "--out", out) == 0
        lines = read_jsonl(out / "results.jsonl")
        assert len(lines) == 2
        assert all(rec["format_version"] == FORMAT_VERSION and rec["config"]["samples"] == 4
                   for rec in lines)
        meta, rows = read_csv(out / "aggregate.csv")
        assert len(rows) == 1 and meta["config"]["mode"] == "nbest"

    def test_byte_identical_reruns(self, files):
        tmp, vocab, corpus, train = files
        outs = []
        for workers in (1, 3):
            out = tmp / "same"
            _run("evaluate", "--vocab", vocab, "--corpus", corpus, "--scorer", "builtin:N=2,d=0.5",
                 "--train-corpus", train, "--mode", "wor", "--samples", 3, "--seed", 11,
                 "--workers", workers, "--out", out)
            outs.append((out / "results.jsonl").read_bytes())
        assert outs[0] == outs[1]

    def test_exhausted_recorded(self, files):
        tmp, vocab, _, train = files
        corpus = tmp / "abab.txt"
        corpus.write_text("ab ab\n", encoding="utf-8")
        _run("evaluate", "--vocab", vocab, "--corpus", corpus, "--scorer", ECHO, "--mode", "wor",
             "--samples", 128, "--seed", 1, "--out", tmp / "ex")
        (rec,) = read_jsonl(tmp / "ex" / "results.jsonl")
        assert rec["provenance"]["exhausted"] is True
        assert rec["provenance"]["n_samples"] == 4

    def test_seed_required(self, files):
        _, vocab, corpus, _ = files
        with pytest.raises(SystemExit):
            _run("sample", "--vocab", vocab, "--corpus", corpus, "--out", "x", "--mode", "wr")

    def test_error_report(self, files, capsys):
        tmp, vocab, _, _ = files
        corpus = tmp / "bad.txt"
        corpus.write_text("ab\nabc\n", encoding="utf-8")
        code = _run("evaluate", "--vocab", vocab, "--corpus", corpus, "--scorer", ECHO,
                    "--seed", 0, "--out", tmp / "err")
        assert code == 2
        report = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert report["doc_id"] == 1 and report["dataset"] == "bad"
        assert report["error"] == "Uncoverable"

    def test_entropy_and_sample(self, files):
        tmp, vocab, corpus, _ = files
        assert _run("entropy", "--vocab", vocab, "--corpus", corpus, "--bits", "--out", tmp / "e") == 0
        _, rows = read_csv(tmp / "e" / "entropy.csv")
        assert float(rows[0]["entropy_bits"]) == pytest.approx(2.0)
        assert _run("sample", "--vocab", vocab, "--corpus", corpus, "--mode", "wor", "--samples", 2,
                    "--consistent", "--seed", 3, "--out", tmp / "s") == 0
        recs = read_jsonl(tmp / "s" / "samples.jsonl")
        assert [len(r["samples"]) for r in recs] == [2, 2]

    def test_analysis_commands(self, files):
        tmp, vocab, corpus, train = files
        corpus2 = tmp / "more.txt"
        corpus2.write_text("ab b\na a ab ab\nb ab\n", encoding="utf-8")
        model = tmp / "lm.json"
        assert _run("train-lm", "--vocab", vocab, "--corpus", train, "--order", 2,
                    "--discount", 0.5, "--out", model) == 0
        scorer = f"builtin:{model}"
        base = ["--vocab", vocab, "--corpus", corpus, "--corpus", corpus2, "--scorer", scorer]
        assert _run("evaluate", *base, "--mode", "nbest", "--samples", 8, "--seed", 0,
                    "--out", tmp / "ev") == 0
        meta, rows = read_csv(tmp / "ev" / "aggregate.csv")
        assert [r["dataset"] for r in rows] == ["corpus", "more"]
        assert _run("correlate", "--results", tmp / "ev" / "results.jsonl", "--estimator", "nbest",
                    "--out", tmp / "co") == 0
        _, rows = read_csv(tmp / "co" / "fig3_scatter.csv")
        assert len(rows) == 5
        assert _run("curve", *base, "--samples", 4, "--out", tmp / "cu") == 0
        _, rows = read_csv(tmp / "cu" / "fig4_curve.csv")
        assert [int(r["n"]) for r in rows] == [1, 2, 3, 4]
        assert _run("caching", "--vocab", vocab, "--corpus", corpus, "--scorer",
                    f"builtin-cache:{model}", "--mode", "wr", "--samples", 4, "--seed", 2,
                    "--out", tmp / "ca") == 0
        _, rows = read_csv(tmp / "ca" / "table3_caching.csv")
        assert len(rows) == 6
        assert _run("sweep", *base, "--mode", "wor1best", "--samples", 2, "--seed", 0,
                    "--temperatures", "0.5,1,2", "--out", tmp / "sw") == 0
        _, rows = read_csv(tmp / "sw" / "fig2_sweep.csv")
        assert len(rows) == 3

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "tokmarginal", "--help"],
                             capture_output=True, text=True, check=True)
        assert "evaluate" in out.stdout
