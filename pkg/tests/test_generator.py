import math

import pytest
from hypothesis import given, settings, strategies as st

from winomine.corpus import SentenceRecord
from winomine.generator import (
    DatasetError,
    MaskedExample,
    downsample,
    example_id,
    generate_examples,
    read_dataset,
    remove_overlap,
    split_pairs,
    write_dataset,
)


def record(text, tags):
    words = tuple(text.split())
    return SentenceRecord("d", 0, words, tuple(tags.split()), text)


DOG_CAT = record(
    "The dog chased the cat because the dog was angry .",
    "DT NN VBD DT NN IN DT NN VBD JJ .",
)


def test_generate_repeated_noun():
    examples = generate_examples(DOG_CAT)
    assert len(examples) == 1
    ex = examples[0]
    assert ex.masked_text == "The dog chased the cat because the [MASK] was angry ."
    assert ex.candidates == ("dog", "cat")
    assert ex.answer_idx == 0


def test_generate_no_repeats():
    rec = record("The dog saw the cat .", "DT NN VBD DT NN .")
    assert generate_examples(rec) == []


def test_generate_substitution_roundtrip():
    ex = generate_examples(DOG_CAT)[0]
    assert ex.substituted() == DOG_CAT.raw_text


def test_generate_masks_second_occurrence_only():
    rec = record("A dog met a dog and a dog ran .", "DT NN VBD DT NN CC DT NN VBD .")
    # no distractor nouns: nothing emitted
    assert generate_examples(rec) == []
    rec2 = record("A dog met a dog near the cat and a dog ran .", "DT NN VBD DT NN IN DT NN CC DT NN VBD .")
    examples = generate_examples(rec2)
    assert len(examples) == 1
    words = examples[0].masked_text.split()
    assert words.index("[MASK]") == 4  # second occurrence; first and third intact
    assert words.count("dog") == 2


def test_generate_case_insensitive_match_keeps_first_surface():
    rec = record("Dog chased the dog and the cat .", "NN VBD DT NN CC DT NN .")
    examples = generate_examples(rec)
    assert len(examples) == 1
    assert examples[0].candidates[0] == "Dog"


def test_generate_zero_distractors_skipped():
    rec = record("the dog bit the dog .", "DT NN VBD DT NN .")
    assert generate_examples(rec) == []


def test_generate_multiple_repeated_nouns_ordered_by_position():
    rec = record(
        "the cat saw the dog then the dog saw the cat .",
        "DT NN VBD DT NN RB DT NN VBD DT NN .",
    )
    examples = generate_examples(rec)
    assert len(examples) == 2
    positions = [ex.masked_text.split().index("[MASK]") for ex in examples]
    assert positions == sorted(positions)


def test_example_invariants():
    with pytest.raises(DatasetError):
        MaskedExample("x", "no mask here", ("a", "b"), 0)
    with pytest.raises(DatasetError):
        MaskedExample("x", "[MASK] and [MASK]", ("a", "b"), 0)
    with pytest.raises(DatasetError):
        MaskedExample("x", "[MASK] ran", ("a",), 0)
    with pytest.raises(DatasetError):
        MaskedExample("x", "[MASK] ran", ("a", "A"), 0)
    with pytest.raises(DatasetError):
        MaskedExample("x", "[MASK] ran", ("a", "b"), 2)


def test_example_id_stable():
    assert example_id("d", 0, "dog", 1) == example_id("d", 0, "dog", 1)
    assert example_id("d", 0, "dog", 1) != example_id("d", 1, "dog", 1)


def _examples(n):
    return [
        MaskedExample(example_id("d", i, "x", 1), "[MASK] ran", ("a", "b"), 0, source={"i": i})
        for i in range(n)
    ]


def test_downsample_identity():
    exs = _examples(100)
    assert list(downsample(exs, 1.0, seed=1)) == exs


def test_downsample_binomial_bound():
    exs = _examples(10_000)
    kept = list(downsample(exs, 0.1, seed=7))
    sigma = math.sqrt(10_000 * 0.1 * 0.9)
    assert abs(len(kept) - 1000) <= 3 * sigma


def test_downsample_deterministic_and_order_independent():
    exs = _examples(500)
    kept_ids = [ex.id for ex in downsample(exs, 0.3, seed=9)]
    assert [ex.id for ex in downsample(exs, 0.3, seed=9)] == kept_ids
    reversed_kept = {ex.id for ex in downsample(list(reversed(exs)), 0.3, seed=9)}
    assert set(kept_ids) == reversed_kept


def test_downsample_composition():
    exs = _examples(500)
    once = list(downsample(exs, 0.3, seed=9))
    twice = list(downsample(downsample(exs, 0.3, seed=9), 1.0, seed=9))
    assert once == twice


def test_downsample_rate_validation():
    with pytest.raises(ValueError):
        list(downsample(_examples(1), 0.0, seed=1))
    with pytest.raises(ValueError):
        list(downsample(_examples(1), 1.5, seed=1))


@settings(max_examples=20)
@given(st.integers(min_value=0, max_value=2**63), st.floats(min_value=0.05, max_value=0.95))
def test_downsample_subset_property(seed, rate):
    exs = _examples(200)
    kept = {ex.id for ex in downsample(exs, rate, seed)}
    wider = {ex.id for ex in downsample(exs, min(1.0, rate + 0.04), seed)}
    assert kept <= wider


def _paired(n_pairs):
    out = []
    for i in range(n_pairs):
        for j in range(2):
            out.append(
                MaskedExample("p%d-%d" % (i, j), "[MASK] ran", ("a", "b"), j, pair_id="pair%d" % i)
            )
    return out


def test_split_no_pairs():
    data = _paired(2)
    out = split_pairs(data, "no_pairs", seed=3)
    assert len(out) == 2
    assert len({ex.pair_id for ex in out}) == 2


def test_split_half_pairs():
    data = _paired(2)
    out = split_pairs(data, "half_pairs", seed=3)
    assert len(out) == 2
    assert len({ex.pair_id for ex in out}) == 1


def test_split_no_pairs_one_member_per_pair():
    data = _paired(10)
    out = split_pairs(data, "no_pairs", seed=11)
    assert len(out) == 10
    assert len({ex.pair_id for ex in out}) == 10


def test_split_incomplete_pair():
    data = _paired(2)[:3]
    with pytest.raises(DatasetError, match="pair1"):
        split_pairs(data, "no_pairs", seed=1)


def test_split_missing_pair_id():
    data = [MaskedExample("x", "[MASK] ran", ("a", "b"), 0)]
    with pytest.raises(DatasetError):
        split_pairs(data, "no_pairs", seed=1)


def test_remove_overlap_disjoint():
    train = _examples(5)
    eval_set = [MaskedExample("e", "[MASK] sat", ("c", "d"), 0)]
    kept, removed = remove_overlap(train, eval_set)
    assert kept == train
    assert removed == 0


def test_remove_overlap_shared_schema():
    shared = MaskedExample("t", "The [MASK] ran", ("dog", "cat"), 0)
    dup = MaskedExample("e", "the  [MASK] ran", ("Cat", "Dog"), 1)  # same under normalization
    train = _examples(3) + [shared]
    kept, removed = remove_overlap(train, [dup])
    assert removed == 1
    assert shared not in kept


def test_remove_overlap_text_and_candidates_must_both_match():
    a = MaskedExample("t", "The [MASK] ran", ("dog", "cat"), 0)
    b = MaskedExample("e", "The [MASK] ran", ("dog", "bird"), 0)
    kept, removed = remove_overlap([a], [b])
    assert removed == 0


def test_dataset_roundtrip(tmp_path):
    path = tmp_path / "d.ndjson"
    exs = _examples(5)
    write_dataset(path, exs)
    assert list(read_dataset(path)) == exs


def test_dataset_malformed_line(tmp_path):
    path = tmp_path / "d.ndjson"
    path.write_text('{"bad": true}\n')
    with pytest.raises(DatasetError, match="line 1"):
        list(read_dataset(path))
