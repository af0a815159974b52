"""
Sampling tokenisations with and without replacement
===================================================

Ancestral sampling draws i.i.d. paths.  Gumbel-perturbed beam search draws
distinct ones and also returns the threshold kappa needed to weight them.
"""

import math
from collections import Counter

from tokmarginal import Vocab, build_lattice
from tokmarginal.estimators import q_kappa
from tokmarginal.sampler import sample_wor, sample_wor_with_best, sample_wr

vocab = Vocab({"a": math.log(0.4), "aa": math.log(0.2)})
lat = build_lattice("aaa", vocab)

# with replacement: frequencies approach Q(T|D) = 2/7, 5/14, 5/14
counts = Counter(t.pieces for t in sample_wr(lat, 7000, seed=0).tokenisations)
for pieces, c in sorted(counts.items()):
    print("WR ", ".".join(pieces), c / 7000)

###############################################################################
# Without replacement every path appears at most once.  Each sample carries
# its perturbed key; kappa is the next key below the retained ones.

ss = sample_wor(lat, 2, seed=3)
for tok, key in ss.samples:
    print("WOR", ".".join(tok.pieces), f"key={key:.3f}",
          f"q_kappa={q_kappa(tok.log_q_cond, ss.kappa):.3f}")
print("kappa =", ss.kappa)

# asking for more samples than there are paths returns them all, exhausted
print("exhausted:", sample_wor(lat, 5, seed=3).exhausted)

###############################################################################
# The 1-best variant always keeps the best path and samples the rest.

ss = sample_wor_with_best(lat, 1, seed=3)
print([".".join(t.pieces) for t in ss.tokenisations], "kappa =", ss.kappa)
