import pathlib

import pytest

from winomine import corpus, generator, scoring, wordpiece

DATA = pathlib.Path(__file__).parent / "data"

GOLDEN_CORPUS = DATA / "golden_corpus.pretagged"
GOLDEN_VOCAB = DATA / "golden_vocab.txt"
GOLDEN_DATASET = DATA / "golden_dataset.ndjson"


@pytest.fixture(scope="session")
def golden_vocab():
    return wordpiece.load_vocab(GOLDEN_VOCAB)


@pytest.fixture(scope="session")
def golden_records():
    return list(corpus.load_corpus(GOLDEN_CORPUS, "pretagged"))


@pytest.fixture(scope="session")
def golden_examples():
    return list(generator.read_dataset(GOLDEN_DATASET))


@pytest.fixture(scope="session")
def baseline_scorer(golden_records, golden_vocab):
    return scoring.fit_baseline_scorer(golden_records, golden_vocab, smoothing=1.0)


@pytest.fixture
def toy_vocab():
    return wordpiece.Vocab(
        ["[MASK]", "[UNK]", "[CLS]", "[SEP]", "play", "##ing", "i", "like", "dog", "cat", "the"]
    )
