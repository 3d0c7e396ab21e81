"""Mining of masked pronoun-style examples from tagged sentences.

A sentence with a repeated noun yields one example per distinct repeated
noun: the second occurrence is masked, the other distinct nouns in the
sentence become distractors.
"""

import hashlib
import json
import random
from dataclasses import dataclass, field

from .corpus import detokenize, noun_positions
from .wordpiece import MASK_TOKEN


class DatasetError(ValueError):
    pass


def normalize_candidate(text):
    """Match-normalization for candidates and overlap checks."""
    return " ".join(text.split()).lower()


@dataclass(frozen=True)
class MaskedExample:
    id: str
    masked_text: str
    candidates: tuple
    answer_idx: int
    pair_id: str = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.masked_text.count(MASK_TOKEN) != 1:
            raise DatasetError("masked_text must contain exactly one %s: %r" % (MASK_TOKEN, self.masked_text))
        if len(self.candidates) < 2:
            raise DatasetError("need at least two candidates (id %s)" % self.id)
        if not 0 <= self.answer_idx < len(self.candidates):
            raise DatasetError("answer_idx out of range (id %s)" % self.id)
        normalized = [normalize_candidate(c) for c in self.candidates]
        if len(set(normalized)) != len(normalized):
            raise DatasetError("candidates not distinct under normalization (id %s)" % self.id)

    @property
    def answer(self):
        return self.candidates[self.answer_idx]

    def substituted(self, candidate=None):
        """The text with a candidate (default: the answer) in the mask slot."""
        return self.masked_text.replace(MASK_TOKEN, candidate if candidate is not None else self.answer)

    def to_json(self):
        return json.dumps(
            {
                "id": self.id,
                "masked_text": self.masked_text,
                "candidates": list(self.candidates),
                "answer_idx": self.answer_idx,
                "pair_id": self.pair_id,
                "source": self.source,
            },
            ensure_ascii=False,
            sort_keys=False,
        )

    @classmethod
    def from_json(cls, line):
        obj = json.loads(line)
        return cls(
            id=obj["id"],
            masked_text=obj["masked_text"],
            candidates=tuple(obj["candidates"]),
            answer_idx=obj["answer_idx"],
            pair_id=obj.get("pair_id"),
            source=obj.get("source", {}),
        )


def example_id(doc_id, sent_idx, noun, occurrence_idx):
    """Stable digest so re-runs and joins agree."""
    key = "\x1f".join([str(doc_id), str(sent_idx), noun, str(occurrence_idx)])
    return hashlib.blake2b(key.encode("utf-8"), digest_size=8).hexdigest()


def generate_examples(record):
    """Mine examples from one tagged sentence.

    For each noun string occurring at least twice (case-insensitive match),
    mask its second occurrence; the correct candidate is the first
    occurrence's surface form, distractors are the other distinct nouns.
    """
    positions = noun_positions(record)
    occurrences = {}
    for pos in positions:
        occurrences.setdefault(record.words[pos].lower(), []).append(pos)

    # first-occurrence surface per distinct noun, in sentence order
    first_surface = {}
    order = []
    for pos in positions:
        key = record.words[pos].lower()
        if key not in first_surface:
            first_surface[key] = record.words[pos]
            order.append(key)

    out = []
    for key in order:
        occ = occurrences[key]
        if len(occ) < 2:
            continue
        masked_pos = occ[1]
        distractors = [first_surface[k] for k in order if k != key]
        if not distractors:
            continue
        words = list(record.words)
        words[masked_pos] = MASK_TOKEN
        out.append(
            MaskedExample(
                id=example_id(record.doc_id, record.sent_idx, key, 1),
                masked_text=detokenize(words),
                candidates=tuple([first_surface[key]] + distractors),
                answer_idx=0,
                pair_id=None,
                source={"doc_id": record.doc_id, "sent_idx": record.sent_idx},
            )
        )
    out.sort(key=lambda ex: ex.masked_text.split().index(MASK_TOKEN))
    return out


def _hash_fraction(seed, example_id_):
    key = int(seed).to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(example_id_.encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2**64


def downsample(examples, keep_rate, seed):
    """Order-preserving Bernoulli thinning keyed on (seed, example id)."""
    if not 0 < keep_rate <= 1:
        raise ValueError("keep_rate must be in (0, 1]")
    for ex in examples:
        if _hash_fraction(seed, ex.id) < keep_rate:
            yield ex


def _group_pairs(dataset):
    pairs = {}
    for ex in dataset:
        if ex.pair_id is None:
            raise DatasetError("example %s has no pair_id" % ex.id)
        pairs.setdefault(ex.pair_id, []).append(ex)
    bad = sorted(pid for pid, members in pairs.items() if len(members) != 2)
    if bad:
        raise DatasetError("incomplete pairs: %s" % ", ".join(bad))
    return pairs


def split_pairs(dataset, mode, seed):
    """Halve a paired dataset.

    no_pairs keeps one member per pair (seeded coin); half_pairs keeps both
    members of a seeded random half of the pairs.
    """
    pairs = _group_pairs(dataset)
    rng = random.Random(seed)
    keep = set()
    if mode == "no_pairs":
        for pid in sorted(pairs):
            keep.add(pairs[pid][rng.randrange(2)].id)
    elif mode == "half_pairs":
        pids = sorted(pairs)
        rng.shuffle(pids)
        for pid in pids[: len(pids) // 2]:
            keep.update(ex.id for ex in pairs[pid])
    else:
        raise ValueError("unknown split mode: %r" % mode)
    return [ex for ex in dataset if ex.id in keep]


def _overlap_key(ex):
    return (
        normalize_candidate(ex.masked_text),
        frozenset(normalize_candidate(c) for c in ex.candidates),
    )


def remove_overlap(train, eval_set):
    """Drop training examples whose text and candidate set match an eval example."""
    eval_keys = {_overlap_key(ex) for ex in eval_set}
    kept = [ex for ex in train if _overlap_key(ex) not in eval_keys]
    return kept, len(train) - len(kept)


def write_dataset(path, examples):
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(ex.to_json())
            f.write("\n")


def read_dataset(path):
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield MaskedExample.from_json(line)
            except (json.JSONDecodeError, KeyError) as exc:
                raise DatasetError("line %d: %s" % (line_no, exc)) from exc
