import io
import json
import shlex
import sys

import pytest

from winomine.protocol import (
    PROTOCOL_VERSION,
    ProtocolError,
    RemoteScorer,
    decode_log_probs,
    encode_log_probs,
    serve,
)
from winomine.scoring import NEG_INF, fit_baseline_scorer
from winomine.corpus import SentenceRecord
from winomine.wordpiece import Vocab


@pytest.fixture
def vocab():
    return Vocab(["[MASK]", "[UNK]", "[CLS]", "[SEP]", "dog", "cat", "the", "ran"])


@pytest.fixture
def scorer(vocab):
    words = ("the", "dog", "ran")
    rec = SentenceRecord("d", 0, words, ("DT", "NN", "VBD"), " ".join(words))
    return fit_baseline_scorer([rec], vocab)


def run_server(scorer, messages):
    infile = io.StringIO("".join(json.dumps(m) + "\n" for m in messages))
    outfile = io.StringIO()
    serve(scorer, infile, outfile)
    return [json.loads(line) for line in outfile.getvalue().splitlines()]


def hello(digest):
    return {"type": "hello", "protocol": PROTOCOL_VERSION, "vocab_digest": digest}


def test_encode_decode_roundtrip():
    values = [-1.5, 0.0, NEG_INF]
    assert decode_log_probs(encode_log_probs(values)) == values
    assert encode_log_probs([NEG_INF]) == [None]


def test_encode_rejects_nan():
    with pytest.raises(ProtocolError):
        encode_log_probs([float("nan")])


def test_handshake_ok(scorer):
    replies = run_server(scorer, [hello(scorer.vocab_digest)])
    assert replies == [hello(scorer.vocab_digest)]


def test_handshake_digest_mismatch_keeps_stream_alive(scorer):
    replies = run_server(scorer, [hello("deadbeef"), hello(scorer.vocab_digest)])
    assert replies[0]["type"] == "error"
    assert replies[1]["type"] == "hello"


def test_score_request(scorer):
    req = {
        "type": "score",
        "id": "r1",
        "pieces": ["the", "[MASK]", "ran"],
        "mask_positions": [1],
        "targets": ["dog"],
    }
    replies = run_server(scorer, [req])
    assert replies[0]["type"] == "result"
    assert replies[0]["id"] == "r1"
    assert replies[0]["log_probs"] == [pytest.approx(scorer.piece_log_prob("dog"))]


def test_score_neg_inf_encodes_null(scorer):
    req = {
        "type": "score",
        "id": "r2",
        "pieces": ["the", "[MASK]", "ran"],
        "mask_positions": [1],
        "targets": ["zzz-not-in-vocab"],
    }
    replies = run_server(scorer, [req])
    assert replies[0]["log_probs"] == [None]


def test_bad_request_answers_error_and_continues(scorer):
    good = {
        "type": "score",
        "id": "ok",
        "pieces": ["the", "[MASK]", "ran"],
        "mask_positions": [1],
        "targets": ["dog"],
    }
    bad = {"type": "score", "id": "bad", "pieces": [], "mask_positions": [0], "targets": []}
    replies = run_server(scorer, [bad, good])
    assert replies[0]["type"] == "error"
    assert replies[0]["id"] == "bad"
    assert replies[1]["type"] == "result"


def test_unknown_type(scorer):
    replies = run_server(scorer, [{"type": "nonsense", "id": "x"}])
    assert replies[0]["type"] == "error"


SERVER_SCRIPT = """
import sys
from winomine.corpus import SentenceRecord
from winomine.protocol import serve
from winomine.scoring import fit_baseline_scorer
from winomine.wordpiece import Vocab
vocab = Vocab(["[MASK]", "[UNK]", "[CLS]", "[SEP]", "dog", "cat", "the", "ran"])
words = ("the", "dog", "ran")
rec = SentenceRecord("d", 0, words, ("DT", "NN", "VBD"), " ".join(words))
serve(fit_baseline_scorer([rec], vocab), sys.stdin, sys.stdout)
"""


def remote(vocab, **kwargs):
    return RemoteScorer("exec:%s -c %s" % (sys.executable, shlex.quote(SERVER_SCRIPT)), vocab, **kwargs)


def test_remote_roundtrip_matches_local(scorer, vocab):
    with remote(vocab) as client:
        local = scorer.score(["the", "[MASK]", "ran"], [1], ["dog"])
        got = client.score(["the", "[MASK]", "ran"], [1], ["dog"])
        assert got == local


def test_remote_batch_and_neg_inf(scorer, vocab):
    reqs = [
        (["the", "[MASK]", "ran"], [1], ["dog"]),
        (["the", "[MASK]", "ran"], [1], ["zzz"]),
        (["the", "[MASK]", "[MASK]"], [1, 2], ["dog", "cat"]),
    ]
    with remote(vocab, max_in_flight=2) as client:
        results = client.score_batch(reqs)
    assert results[0] == scorer.score(*reqs[0])
    assert results[1] == [NEG_INF]
    assert results[2] == scorer.score(*reqs[2])


def test_remote_handshake_digest_mismatch(vocab):
    other = Vocab(["[MASK]", "[UNK]", "[CLS]", "[SEP]", "different"])
    with pytest.raises(ProtocolError):
        remote(other)


def test_remote_replay_cache(vocab, scorer, tmp_path):
    cache = tmp_path / "cache.ndjson"
    req = (["the", "[MASK]", "ran"], [1], ["dog"])
    with remote(vocab, cache_path=str(cache)) as client:
        first = client.score(*req)
    # second run answers from cache even though requests would hit the server
    with remote(vocab, cache_path=str(cache)) as client:
        assert client.score(*req) == first
    assert cache.exists()
