"""
Segmentation lattices, n-best lists and entropy
================================================

A unigram vocabulary scores each token.  A text's tokenisations are the
paths through a lattice over its character positions.
"""

import math

from tokmarginal import Vocab, build_lattice, lattice_entropy, viterbi_nbest

# a three-character word and a two-token vocabulary
vocab = Vocab({"a": math.log(0.4), "aa": math.log(0.2)})
lat = build_lattice("aaa", vocab)

# the forward score at the last node sums every path
print("log Q(D) =", lat.log_normalizer, " Q(D) =", math.exp(lat.log_normalizer))

# every path, best first; equal scores are ordered by their span end positions
for tok in viterbi_nbest(lat, 10):
    print(f"{' | '.join(tok.pieces):10s} Q(T|D) = {math.exp(tok.log_q_cond):.4f}")

# entropy of Q(T|D) in nats and bits
print("entropy:", lattice_entropy(lat), "nats,", lattice_entropy(lat, bits=True), "bits")

###############################################################################
# Temperature divides every token score.  Cold lattices concentrate on the
# best path, hot ones spread out towards uniform.

for tau in (0.01, 0.5, 1.0, 2.0, 100.0):
    print(f"tau={tau:<6} H={lattice_entropy(build_lattice('aaa', vocab, tau)):.4f}")

# "aaa" has two equally good paths, so even the coldest lattice keeps log 2 nats
print("log 2 =", math.log(2))
