"""Benchmark metrics: overall/associative/switchable accuracies, switch
consistency, and entailment-pair evaluation via mask conversion.
"""

import json
from dataclasses import dataclass

from .corpus import BaselineTagger, noun_positions, SentenceRecord
from .generator import MaskedExample
from .scoring import predict
from .wordpiece import MASK_TOKEN, basic_tokenize

PRONOUNS = frozenset(
    "he him his she her hers it its they them their theirs himself herself itself themselves".split()
)


class AnnotationError(ValueError):
    pass


class AlignmentError(ValueError):
    """Premise/hypothesis pair cannot be aligned to a unique mask conversion."""


class SingleCandidateAlignment(AlignmentError):
    """Alignment succeeded but the premise offers no alternative noun."""

    def __init__(self, candidate):
        super().__init__("premise has no alternative noun for candidate %r" % candidate)
        self.candidate = candidate


@dataclass(frozen=True)
class WscAnnotation:
    example_id: str
    associative: bool
    switchable: bool
    switched_text: str = None
    switched_answer_idx: int = None

    def __post_init__(self):
        if self.switchable != (self.switched_text is not None):
            raise AnnotationError(
                "switched_text must be present iff switchable (example %s)" % self.example_id
            )

    @classmethod
    def from_json(cls, line):
        obj = json.loads(line)
        return cls(
            example_id=obj["example_id"],
            associative=obj["associative"],
            switchable=obj["switchable"],
            switched_text=obj.get("switched_text"),
            switched_answer_idx=obj.get("switched_answer_idx"),
        )


@dataclass
class MetricsReport:
    overall: tuple = (0, 0)  # (correct, total) per subset
    non_associative: tuple = (0, 0)
    associative: tuple = (0, 0)
    unswitched: tuple = (0, 0)
    switched: tuple = (0, 0)
    consistency: float = None
    wnli_accuracy: float = None

    @staticmethod
    def _acc(pair):
        correct, total = pair
        return correct / total if total else None

    def accuracies(self):
        return {
            "overall": self._acc(self.overall),
            "non_associative": self._acc(self.non_associative),
            "associative": self._acc(self.associative),
            "unswitched": self._acc(self.unswitched),
            "switched": self._acc(self.switched),
            "consistency": self.consistency,
            "wnli": self.wnli_accuracy,
        }

    def to_json(self):
        return json.dumps(
            {
                "counts": {
                    "overall": list(self.overall),
                    "non_associative": list(self.non_associative),
                    "associative": list(self.associative),
                    "unswitched": list(self.unswitched),
                    "switched": list(self.switched),
                },
                "accuracies": self.accuracies(),
            }
        )


def load_annotations(path):
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                ann = WscAnnotation.from_json(line)
                out[ann.example_id] = ann
    return out


def consistency(preds_unswitched, preds_switched):
    """Fraction of aligned prediction pairs whose predicted party differs."""
    if len(preds_unswitched) != len(preds_switched):
        raise ValueError("prediction lists must align")
    if not preds_unswitched:
        return 0.0
    flips = sum(1 for a, b in zip(preds_unswitched, preds_switched) if a != b)
    return flips / len(preds_unswitched)


def _switched_example(ex, ann):
    return MaskedExample(
        id=ex.id + "#switched",
        masked_text=ann.switched_text,
        candidates=ex.candidates,
        answer_idx=ann.switched_answer_idx,
        pair_id=ex.pair_id,
        source=ex.source,
    )


def evaluate_wsc(scorer, examples, annotations, shuffle_seed=0, consistency_mode="flip"):
    """Score every example (and its switched variant where one exists) and
    fold the outcomes into a MetricsReport.

    consistency_mode "flip" counts any predicted-party change; "flip_correct"
    additionally requires both predictions to be correct.
    """
    counts = {k: [0, 0] for k in ("overall", "non_associative", "associative", "unswitched", "switched")}
    flips = []
    for ex in examples:
        ann = annotations.get(ex.id)
        if ann is None:
            raise AnnotationError("missing annotation for example %s" % ex.id)
        pred = predict(scorer, ex, shuffle_seed)
        correct = pred == ex.answer_idx
        _tally(counts["overall"], correct)
        _tally(counts["associative" if ann.associative else "non_associative"], correct)
        if ann.switchable:
            sw = _switched_example(ex, ann)
            sw_pred = predict(scorer, sw, shuffle_seed)
            sw_correct = sw_pred == sw.answer_idx
            _tally(counts["unswitched"], correct)
            _tally(counts["switched"], sw_correct)
            flipped = ex.candidates[pred] != sw.candidates[sw_pred]
            if consistency_mode == "flip_correct":
                flips.append(flipped and correct and sw_correct)
            else:
                flips.append(flipped)
    return MetricsReport(
        overall=tuple(counts["overall"]),
        non_associative=tuple(counts["non_associative"]),
        associative=tuple(counts["associative"]),
        unswitched=tuple(counts["unswitched"]),
        switched=tuple(counts["switched"]),
        consistency=(sum(flips) / len(flips)) if flips else None,
    )


def _tally(pair, correct):
    pair[0] += 1 if correct else 0
    pair[1] += 1


def _norm_word(word):
    return word.lower()


def _norm_words(text):
    words = basic_tokenize(text)
    while words and all(not c.isalnum() for c in words[-1]):
        words = words[:-1]  # strip trailing sentence terminators
    return [_norm_word(w) for w in words]


def wnli_to_masked(premise, hypothesis, tagger=None, example_id="wnli"):
    """Locate the hypothesis as a premise window with one pronoun replaced by
    a candidate; emit the premise with that pronoun masked.

    Raises AlignmentError when no alignment or several distinct ones exist.
    """
    if tagger is None:
        tagger = BaselineTagger()
    premise_words = basic_tokenize(premise)
    norm_premise = [_norm_word(w) for w in premise_words]
    hyp_words = basic_tokenize(hypothesis)
    norm_hyp = _norm_words(hypothesis)
    if not norm_hyp:
        raise AlignmentError("empty hypothesis")

    solutions = []  # (matched context words, pronoun position, candidate)
    for p, word in enumerate(norm_premise):
        if word not in PRONOUNS:
            continue
        for i in range(p + 1):
            prefix_len = p - i
            if prefix_len > len(norm_hyp) - 1:
                continue
            if norm_premise[i:p] != norm_hyp[:prefix_len]:
                continue
            rest = len(norm_hyp) - prefix_len
            for m in range(1, rest + 1):
                suffix = norm_hyp[prefix_len + m:]
                if prefix_len + len(suffix) == 0:
                    continue  # no shared context: not a substituted window
                if norm_premise[p + 1: p + 1 + len(suffix)] == suffix:
                    candidate_words = hyp_words[prefix_len: prefix_len + m]
                    solutions.append((prefix_len + len(suffix), p, " ".join(candidate_words)))
    if not solutions:
        raise AlignmentError("hypothesis is not a pronoun-substituted window of the premise")
    # prefer the alignment with the most matched context; a shorter candidate
    # with more surrounding overlap beats one that swallows the window tail
    best_context = max(s[0] for s in solutions)
    distinct = {(p, cand.lower()): cand for ctx, p, cand in solutions if ctx == best_context}
    if len(distinct) > 1:
        raise AlignmentError(
            "ambiguous alignment: %s"
            % "; ".join(sorted("pronoun@%d -> %r" % (p, c) for (p, _), c in distinct.items()))
        )
    (p, _), candidate = next(iter(distinct.items()))

    tags = tagger.tag(premise_words)
    record = SentenceRecord("wnli", 0, tuple(premise_words), tags, premise)
    cand_tokens = {w.lower() for w in candidate.split()}
    distractors = []
    for pos in noun_positions(record):
        surface = premise_words[pos]
        if surface.lower() in cand_tokens:
            continue
        if surface.lower() not in {d.lower() for d in distractors}:
            distractors.append(surface)

    if not distractors:
        raise SingleCandidateAlignment(candidate)

    masked_words = list(premise_words)
    masked_words[p] = MASK_TOKEN
    return MaskedExample(
        id=example_id,
        masked_text=" ".join(masked_words),
        candidates=tuple([candidate] + distractors),
        answer_idx=0,
        pair_id=None,
        source={"dataset": "wnli"},
    )


def parse_wnli_rows(lines):
    """GLUE-layout TSV: header then index<TAB>sentence1<TAB>sentence2<TAB>label."""
    rows = []
    it = iter(lines)
    next(it, None)  # header
    for line_no, line in enumerate(it, 2):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ValueError("line %d: expected 4 tab-separated fields" % line_no)
        idx, premise, hypothesis, label = parts
        if label not in ("0", "1"):
            raise ValueError("line %d: label must be 0 or 1" % line_no)
        rows.append((idx, premise, hypothesis, int(label)))
    return rows


def evaluate_wnli(scorer, rows, tagger=None, shuffle_seed=0, skipped_count_as_incorrect=True):
    """Predict label 1 iff the hypothesis candidate wins the argmax.

    Returns (accuracy, skipped row descriptions).
    """
    if tagger is None:
        tagger = BaselineTagger()
    correct = 0
    total = 0
    skipped = []
    for idx, premise, hypothesis, label in rows:
        total += 1
        try:
            ex = wnli_to_masked(premise, hypothesis, tagger, example_id="wnli-%s" % idx)
        except SingleCandidateAlignment:
            # sole candidate wins trivially; flagged so readers can audit
            skipped.append((idx, "single-candidate (scored as label 1)"))
            if label == 1:
                correct += 1
            continue
        except AlignmentError as exc:
            skipped.append((idx, str(exc)))
            if not skipped_count_as_incorrect:
                total -= 1
            continue
        pred_label = 1 if predict(scorer, ex, shuffle_seed) == ex.answer_idx else 0
        if pred_label == label:
            correct += 1
    accuracy = correct / total if total else 0.0
    return accuracy, skipped


_COLUMNS = ("overall", "non_associative", "associative", "unswitched", "switched", "consistency", "wnli")
_HEADERS = ("overall", "non-assoc.", "assoc.", "unswitched", "switched", "consist.", "WNLI")


def render_report(report, name="model"):
    """Fixed-order 7-column text table; absent values render as "--"."""
    acc = report.accuracies()
    cells = ["%.3f" % acc[c] if acc[c] is not None else "--" for c in _COLUMNS]
    width = max(len(name), 12)
    header = name.ljust(width) + "".join(h.rjust(12) for h in _HEADERS)
    row = "".ljust(width) + "".join(c.rjust(12) for c in cells)
    return header + "\n" + row + "\n"
