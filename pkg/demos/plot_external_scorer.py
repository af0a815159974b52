"""
Scoring through an external process
===================================

Any program that reads ``{"id", "tokens"}`` lines and writes ``{"id",
"logprobs"}`` lines can act as the language model.  The bundled echo scorer
returns zeros and can answer out of order.
"""

import sys

from tokmarginal.scorer import ExternalScorer, ScoreRequest

cmd = [sys.executable, "-m", "tokmarginal.scorer.echo", "--reverse"]
with ExternalScorer.spawn(cmd, max_in_flight=8) as scorer:
    reqs = [ScoreRequest(i, tuple("x" * i)) for i in range(5)]
    for r in scorer.roundtrip(reqs):
        print(r.id, r.logprobs)
    # score_document also scores the end-of-sequence token
    print("document score:", scorer.score_document(["▁ab", "c"]))
    print("peak requests in flight:", scorer.peak_in_flight)
