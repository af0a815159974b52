"""
One-best versus marginal perplexity on a toy language
=====================================================

Train a token trigram model on one-best tokenisations of synthetic text, then
score held-out text that recombines morphemes in unseen ways.  Summing over
the n-best tokenisations can only raise each document's likelihood.
"""

from tokmarginal import toydata
from tokmarginal.estimators import perplexity
from tokmarginal.evaluation import EvalConfig, evaluate_corpus
from tokmarginal.lattice import build_lattice, viterbi_nbest
from tokmarginal.scorer import train_ngram

lang = toydata.make_language(0)
train = toydata.in_domain_documents(lang, 600, seed=1)
vocab = toydata.build_vocab(lang, train)
corpus = [viterbi_nbest(build_lattice(toydata.render(d), vocab), 1)[0].pieces for d in train]
print(len(vocab), "tokens in the lexicon;", sum(map(len, corpus)), "training tokens")
lm = train_ngram(corpus, 3, 0.75, vocab.tokens)

held_out = toydata.out_of_domain_documents(lang, 15, seed=2)
print("example:", held_out[0][:70])

###############################################################################
# n-best with 16 paths per document against the one-best score

evs = evaluate_corpus(held_out, vocab, lm, EvalConfig("nbest", 16), workers=4)
results = [e.result for e in evs]
one, marg = perplexity(results, "one-best"), perplexity(results, "nbest")
print(f"one-best ppl {one:.4g}  n-best ppl {marg:.4g}  improvement {100 * (one - marg) / one:.4f}%")

# documents whose lattices are more uncertain tend to gain more
for r in sorted(results, key=lambda r: r.entropy_per_token)[-3:]:
    print(f"doc {r.doc_id}: entropy/word {r.entropy_per_token:.3f}  "
          f"gap/word {r.marginal_gap_per_token['nbest']:.5f}")
