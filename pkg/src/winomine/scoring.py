"""Candidate scoring against a masked-token probability provider.

A scorer exposes:
    vocab          — the wordpiece Vocab used for tokenization
    vocab_digest   — hex digest identifying that vocab
    score(pieces, mask_positions, targets) -> list of natural-log probs
                     (one per mask position; -inf allowed)

Multi-piece candidates are masked jointly: a k-piece candidate occupies k
mask slots in a single scorer call and its score is the mean of the k
per-position log-probabilities.
"""

import math
import random
from dataclasses import dataclass

from .wordpiece import MASK_TOKEN, tokenize_text, tokenize_word

NEG_INF = float("-inf")


class ScorerError(RuntimeError):
    """Transport failure or protocol violation while talking to a scorer."""


@dataclass(frozen=True)
class CandidateScore:
    candidate_idx: int
    piece_count: int
    avg_log_prob: float


@dataclass(frozen=True)
class LossParams:
    alpha: float = 20.0
    beta: float = 0.2

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")


def pair_loss(logp_correct, logp_incorrect, params):
    """Margin ranking loss over one (correct, incorrect) candidate pair."""
    return -logp_correct + params.alpha * max(0.0, logp_incorrect - logp_correct + params.beta)


def build_masked_pieces(vocab, masked_text, k):
    """Expand the single mask placeholder into k mask slots.

    Returns (pieces, mask_positions).
    """
    if masked_text.count(MASK_TOKEN) != 1:
        raise ValueError("text must contain exactly one %s" % MASK_TOKEN)
    left, right = masked_text.split(MASK_TOKEN)
    pieces = tokenize_text(vocab, left)
    mask_positions = list(range(len(pieces), len(pieces) + k))
    pieces.extend([MASK_TOKEN] * k)
    pieces.extend(tokenize_text(vocab, right))
    return pieces, mask_positions


def tokenize_candidate(vocab, candidate):
    pieces = []
    for word in candidate.split():
        pieces.extend(tokenize_word(vocab, word))
    return pieces


def candidate_log_prob(scorer, example, candidate_idx):
    targets = tokenize_candidate(scorer.vocab, example.candidates[candidate_idx])
    pieces, mask_positions = build_masked_pieces(scorer.vocab, example.masked_text, len(targets))
    log_probs = scorer.score(pieces, mask_positions, targets)
    if len(log_probs) != len(targets):
        raise ScorerError(
            "scorer returned %d log-probs for %d masks" % (len(log_probs), len(targets))
        )
    return CandidateScore(
        candidate_idx=candidate_idx,
        piece_count=len(targets),
        avg_log_prob=sum(log_probs) / len(log_probs),
    )


def score_candidates(scorer, example):
    return [candidate_log_prob(scorer, example, i) for i in range(len(example.candidates))]


def argmax_with_shuffle(scores, shuffle_seed=None, tiebreak_key=None):
    """Argmax over a score vector; ties go to the lowest index after a seeded
    shuffle of the comparison order (removes dataset-order bias)."""
    order = list(range(len(scores)))
    if shuffle_seed is not None:
        random.Random("%s:%s" % (shuffle_seed, tiebreak_key)).shuffle(order)
    best = order[0]
    for idx in order[1:]:
        if scores[idx] > scores[best]:
            best = idx
    return best


def predict(scorer, example, shuffle_seed=None):
    if len(example.candidates) < 2:
        raise ValueError("need at least two candidates")
    scores = [cs.avg_log_prob for cs in score_candidates(scorer, example)]
    return argmax_with_shuffle(scores, shuffle_seed, example.id)


class UnigramScorer:
    """Context-free masked scorer from corpus piece frequencies.

    Deterministic stand-in for a neural LM: log P(piece) is the smoothed
    unigram frequency over the vocab's content pieces, independent of
    position and context. Pieces outside the content vocab score -inf.
    """

    def __init__(self, vocab, smoothing=1.0):
        if smoothing <= 0:
            raise ValueError("smoothing must be positive")
        self.vocab = vocab
        self.smoothing = smoothing
        self.counts = {}
        self.total = 0
        self._content = set(vocab.content_pieces())

    @property
    def vocab_digest(self):
        return self.vocab.digest()

    def fit(self, records):
        """Count pieces over the word-tokenized corpus."""
        n = 0
        for record in records:
            n += 1
            for word in record.words:
                for piece in tokenize_word(self.vocab, word):
                    if piece in self._content:
                        self.counts[piece] = self.counts.get(piece, 0) + 1
                        self.total += 1
        if n == 0:
            raise ValueError("empty corpus")
        return self

    def piece_log_prob(self, piece):
        if piece not in self._content:
            return NEG_INF
        denom = self.total + self.smoothing * len(self._content)
        return math.log((self.counts.get(piece, 0) + self.smoothing) / denom)

    def score(self, pieces, mask_positions, targets):
        if len(mask_positions) != len(targets):
            raise ScorerError("mask_positions and targets length mismatch")
        for pos in mask_positions:
            if not 0 <= pos < len(pieces) or pieces[pos] != MASK_TOKEN:
                raise ScorerError("position %d is not a mask slot" % pos)
        return [self.piece_log_prob(t) for t in targets]


def fit_baseline_scorer(records, vocab, smoothing=1.0):
    return UnigramScorer(vocab, smoothing).fit(records)
