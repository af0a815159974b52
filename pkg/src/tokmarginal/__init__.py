"""Marginal likelihood of language models over subword tokenisations."""

from .estimators import (DocumentResult, ScoredSample, est_jensen, est_nbest, est_wor,
                         est_wor_1best, est_wr_iwae, perplexity, q_kappa)
from .evaluation import EvalConfig, evaluate_corpus, evaluate_document
from .lattice import (Lattice, NotAPath, Tokenisation, Uncoverable, build_lattice,
                      lattice_entropy, score_tokenisation, viterbi_nbest)
from .sampler import (ConsistentProposal, Mode, SampleSet, build_consistent_proposal,
                      make_rng, sample_wor, sample_wor_with_best, sample_wr)
from .vocab import Vocab, coverage_check, dump_vocab, load_vocab, loads_vocab

__version__ = "0.1.0"
