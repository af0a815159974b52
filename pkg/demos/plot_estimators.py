"""
Estimating the marginal likelihood
==================================

A fixed table plays the role of the language model P(T, D).  The exact
marginal is a sum over all five tokenisations of "aaaa"; each estimator
approximates it from a few of them.
"""

import math

import numpy as np

from tokmarginal import Vocab, build_lattice, viterbi_nbest
from tokmarginal.estimators import estimate
from tokmarginal.sampler import draw

vocab = Vocab({"a": math.log(0.4), "aa": math.log(0.2)})
lat = build_lattice("aaaa", vocab)
paths = viterbi_nbest(lat, 10)
rng = np.random.default_rng(0)
table = {t.ends: float(rng.uniform(-6, -1)) for t in paths}
exact = math.log(sum(math.exp(v) for v in table.values()))
print(f"{len(paths)} paths, exact log marginal {exact:.5f}")

###############################################################################
# Averaging exp(estimate) over many seeds recovers the exact marginal for the
# sampling estimators; a single run is a noisy lower-bound-like estimate.

for est, k in (("wr", 2), ("wor", 2), ("wor1best", 1)):
    vals = []
    for seed in range(4000):
        ss = draw(lat, est, k, seed)
        vals.append(math.exp(estimate(est, ss, [table[t.ends] for t in ss.tokenisations])))
    print(f"{est:9s} k={k} mean {np.mean(vals):.5f} +- {np.std(vals) / math.sqrt(len(vals)):.5f}"
          f"  (exact {math.exp(exact):.5f})")

# n-best is deterministic and grows towards the exact value
for n in range(1, len(paths) + 1):
    print(f"n-best n={n}: {estimate('nbest', None, [table[t.ends] for t in paths[:n]]):.5f}")
