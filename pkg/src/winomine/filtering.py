"""Difficulty-band filtering and the manual quality-audit workflow.

An example's v-score is log P(incorrect|s) - log P(correct|s); the filter
keeps examples inside a closed v band whose pieces are mostly whole words.
"""

import json
import random
from dataclasses import dataclass, field

from .scoring import ScorerError, candidate_log_prob
from .wordpiece import whole_word_fraction

QUALITY_CATEGORIES = ("unsolvable", "hard", "easy", "noise")


@dataclass(frozen=True)
class FilterConfig:
    v_min: float = -0.075
    v_max: float = 0.30
    min_whole_word_frac: float = 0.90
    pair_mode: str = "all"  # "all": every pair must pass; "any": one suffices
    whole_word_scope: str = "sentence"  # or "candidates"
    whole_word_denominator: str = "pieces"  # or "words"

    def __post_init__(self):
        if self.v_min > self.v_max:
            raise ValueError("v_min must not exceed v_max")
        if not 0 <= self.min_whole_word_frac <= 1:
            raise ValueError("min_whole_word_frac must be in [0, 1]")
        if self.pair_mode not in ("all", "any"):
            raise ValueError("pair_mode must be 'all' or 'any'")

    def to_dict(self):
        return {
            "v_min": self.v_min,
            "v_max": self.v_max,
            "min_whole_word_frac": self.min_whole_word_frac,
            "pair_mode": self.pair_mode,
            "whole_word_scope": self.whole_word_scope,
            "whole_word_denominator": self.whole_word_denominator,
        }


@dataclass
class FilterStats:
    total: int = 0
    kept: int = 0
    errored: int = 0
    scorer_digest: str = ""
    config: dict = field(default_factory=dict)

    @property
    def rejected(self):
        return self.total - self.kept - self.errored

    @property
    def keep_rate(self):
        return self.kept / self.total if self.total else 0.0

    def to_json(self):
        return json.dumps(
            {
                "total": self.total,
                "kept": self.kept,
                "errored": self.errored,
                "keep_rate": self.keep_rate,
                "scorer_digest": self.scorer_digest,
                "config": self.config,
            }
        )


def v_score(scorer, example):
    """Incorrect-minus-correct averaged log-probability; pairwise only."""
    if len(example.candidates) != 2:
        raise ValueError("v-score is defined for exactly 2 candidates, got %d" % len(example.candidates))
    incorrect_idx = 1 - example.answer_idx
    correct = candidate_log_prob(scorer, example, example.answer_idx)
    incorrect = candidate_log_prob(scorer, example, incorrect_idx)
    return incorrect.avg_log_prob - correct.avg_log_prob


def pairwise_v_scores(scorer, example):
    """One v per distractor: avg log P(distractor) - avg log P(correct)."""
    correct = candidate_log_prob(scorer, example, example.answer_idx).avg_log_prob
    return [
        candidate_log_prob(scorer, example, i).avg_log_prob - correct
        for i in range(len(example.candidates))
        if i != example.answer_idx
    ]


def passes_filter(v, whole_word_frac, cfg):
    return cfg.v_min <= v <= cfg.v_max and whole_word_frac >= cfg.min_whole_word_frac


def _whole_word_text(example, cfg):
    if cfg.whole_word_scope == "candidates":
        return " ".join(example.candidates)
    return example.substituted()


def filter_dataset(scorer, examples, cfg):
    """Returns (kept examples, FilterStats). Scorer failures count an example
    as errored, never as silently kept."""
    stats = FilterStats(scorer_digest=getattr(scorer, "vocab_digest", ""), config=cfg.to_dict())
    kept = []
    for ex in examples:
        stats.total += 1
        try:
            frac = whole_word_fraction(
                scorer.vocab, _whole_word_text(ex, cfg), denominator=cfg.whole_word_denominator
            )
            vs = pairwise_v_scores(scorer, ex)
            checks = [passes_filter(v, frac, cfg) for v in vs]
        except (ScorerError, ValueError):
            stats.errored += 1
            continue
        ok = all(checks) if cfg.pair_mode == "all" else any(checks)
        if ok:
            kept.append(ex)
            stats.kept += 1
    return kept, stats


@dataclass(frozen=True)
class QualityTally:
    counts: dict
    sample_size: int

    def percentages(self):
        if self.sample_size == 0:
            return {c: 0.0 for c in QUALITY_CATEGORIES}
        return {c: self.counts[c] / self.sample_size for c in QUALITY_CATEGORIES}


def audit_sample(examples, n, seed):
    """Seeded uniform sample without replacement, for manual labeling."""
    pool = list(examples)
    if n > len(pool):
        raise ValueError("sample size %d exceeds dataset size %d" % (n, len(pool)))
    return random.Random(seed).sample(pool, n)


def tally_audit(lines):
    """Parse 'example_id<TAB>category' label lines into a QualityTally."""
    counts = {c: 0 for c in QUALITY_CATEGORIES}
    size = 0
    for line_no, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError("line %d: expected 'example_id<TAB>category'" % line_no)
        label = parts[1].strip().lower()
        if label not in counts:
            raise ValueError("line %d: unknown category %r" % (line_no, parts[1]))
        counts[label] += 1
        size += 1
    return QualityTally(counts=counts, sample_size=size)
