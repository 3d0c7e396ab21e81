"""Newline-delimited JSON scorer protocol over pipes or TCP.

Handshake:  {"type":"hello","protocol":1,"vocab_digest":"<hex>"}  both ways.
Scoring:    {"type":"score","id":...,"pieces":[...],"mask_positions":[...],
             "targets":[...]}
        ->  {"type":"result","id":...,"log_probs":[...]}
log_probs are natural-log and finite-or-null; null encodes -inf.
Server-side failures answer {"type":"error","id":...,"message":...} and keep
the stream alive.
"""

import hashlib
import json
import math
import os
import selectors
import shlex
import socket
import subprocess

from .scoring import NEG_INF, ScorerError

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_IN_FLIGHT = 16


class ProtocolError(ScorerError):
    pass


def encode_log_probs(values):
    out = []
    for v in values:
        if v == NEG_INF:
            out.append(None)
        elif isinstance(v, (int, float)) and math.isfinite(v):
            out.append(float(v))
        else:
            raise ProtocolError("log_prob must be finite or -inf, got %r" % (v,))
    return out


def decode_log_probs(values):
    out = []
    for v in values:
        if v is None:
            out.append(NEG_INF)
        elif isinstance(v, (int, float)) and math.isfinite(v):
            out.append(float(v))
        else:
            raise ProtocolError("malformed log_prob %r" % (v,))
    return out


def write_message(stream, obj):
    stream.write(json.dumps(obj, ensure_ascii=False) + "\n")
    stream.flush()


def read_message(stream):
    line = stream.readline()
    if not line:
        return None
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError("malformed message: %s" % exc) from exc


def _validate_score_request(msg):
    for key in ("id", "pieces", "mask_positions", "targets"):
        if key not in msg:
            raise ProtocolError("score request missing field %r" % key)
    if len(msg["mask_positions"]) != len(msg["targets"]):
        raise ProtocolError("mask_positions and targets length mismatch")


def serve(scorer, infile, outfile):
    """Answer handshake and score requests until EOF; one bad request never
    kills the stream."""
    while True:
        try:
            msg = read_message(infile)
        except ProtocolError as exc:
            write_message(outfile, {"type": "error", "id": None, "message": str(exc)})
            continue
        if msg is None:
            return
        msg_id = msg.get("id") if isinstance(msg, dict) else None
        try:
            mtype = msg.get("type")
            if mtype == "hello":
                if msg.get("protocol") != PROTOCOL_VERSION:
                    raise ProtocolError("unsupported protocol version %r" % msg.get("protocol"))
                if msg.get("vocab_digest") != scorer.vocab_digest:
                    raise ProtocolError("vocab digest mismatch")
                write_message(
                    outfile,
                    {"type": "hello", "protocol": PROTOCOL_VERSION, "vocab_digest": scorer.vocab_digest},
                )
            elif mtype == "score":
                _validate_score_request(msg)
                log_probs = scorer.score(msg["pieces"], msg["mask_positions"], msg["targets"])
                write_message(
                    outfile,
                    {"type": "result", "id": msg["id"], "log_probs": encode_log_probs(log_probs)},
                )
            else:
                raise ProtocolError("unknown message type %r" % mtype)
        except (ProtocolError, ScorerError, ValueError) as exc:
            write_message(outfile, {"type": "error", "id": msg_id, "message": str(exc)})


class _PipeTransport:
    def __init__(self, argv):
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, encoding="utf-8"
        )
        self.infile = self.proc.stdout
        self.outfile = self.proc.stdin
        self._fd = self.infile.fileno()

    def close(self):
        self.outfile.close()
        self.proc.wait(timeout=5)


class _TcpTransport:
    def __init__(self, host, port):
        self.sock = socket.create_connection((host, port))
        self.infile = self.sock.makefile("r", encoding="utf-8")
        self.outfile = self.sock.makefile("w", encoding="utf-8")
        self._fd = self.sock.fileno()

    def close(self):
        self.outfile.close()
        self.infile.close()
        self.sock.close()


def open_transport(descriptor):
    """'exec: cmd args...' spawns a child on pipes; 'tcp:host:port' connects."""
    if descriptor.startswith("exec:"):
        return _PipeTransport(shlex.split(descriptor[len("exec:"):]))
    if descriptor.startswith("tcp:"):
        host, _, port = descriptor[len("tcp:"):].rpartition(":")
        return _TcpTransport(host, int(port))
    raise ValueError("unknown scorer endpoint descriptor: %r" % descriptor)


def _request_digest(pieces, mask_positions, targets):
    blob = json.dumps([pieces, mask_positions, targets], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class RemoteScorer:
    """Client for an external scorer speaking the wire protocol.

    Responses are matched by id, so the server may answer out of order.
    An optional replay cache makes re-runs byte-identical without the
    server.
    """

    def __init__(self, endpoint, vocab, timeout=DEFAULT_TIMEOUT,
                 max_in_flight=DEFAULT_MAX_IN_FLIGHT, cache_path=None):
        self.vocab = vocab
        self.vocab_digest = vocab.digest()
        self.timeout = timeout
        self.max_in_flight = max_in_flight
        self._next_id = 0
        self._pending = {}
        self._cache = {}
        self._cache_file = None
        if cache_path is not None:
            try:
                with open(cache_path, encoding="utf-8") as f:
                    for line in f:
                        obj = json.loads(line)
                        self._cache[obj["digest"]] = decode_log_probs(obj["log_probs"])
            except FileNotFoundError:
                pass
            self._cache_file = open(cache_path, "a", encoding="utf-8")
        self.transport = open_transport(endpoint)
        self._selector = selectors.DefaultSelector()
        self._selector.register(self.transport._fd, selectors.EVENT_READ)
        self._rbuf = bytearray()
        self._handshake()

    def _handshake(self):
        write_message(
            self.transport.outfile,
            {"type": "hello", "protocol": PROTOCOL_VERSION, "vocab_digest": self.vocab_digest},
        )
        reply = self._read_timeout()
        if reply is None or reply.get("type") != "hello":
            raise ProtocolError("handshake failed: %r" % (reply,))
        if reply.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError("server protocol version %r unsupported" % reply.get("protocol"))
        if reply.get("vocab_digest") != self.vocab_digest:
            raise ProtocolError("vocab digest mismatch with server")

    def _read_timeout(self):
        # raw fd reads with our own line buffer: select() cannot see data
        # hiding in a buffered stream
        while True:
            nl = self._rbuf.find(b"\n")
            if nl >= 0:
                line = self._rbuf[:nl].decode("utf-8")
                del self._rbuf[: nl + 1]
                if not line.strip():
                    continue
                try:
                    return json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ProtocolError("malformed message: %s" % exc) from exc
            if not self._selector.select(self.timeout):
                raise ScorerError("scorer timed out after %.1fs" % self.timeout)
            chunk = os.read(self.transport._fd, 65536)
            if not chunk:
                return None
            self._rbuf.extend(chunk)

    def _recv_result(self):
        msg = self._read_timeout()
        if msg is None:
            raise ScorerError("scorer closed the connection")
        mtype = msg.get("type")
        if mtype == "error":
            raise ProtocolError("scorer error for id %r: %s" % (msg.get("id"), msg.get("message")))
        if mtype != "result":
            raise ProtocolError("unexpected message type %r" % mtype)
        msg_id = msg.get("id")
        if msg_id not in self._pending:
            raise ProtocolError("response with unknown id %r" % msg_id)
        if len(msg["log_probs"]) != self._pending[msg_id]:
            raise ProtocolError("response log_probs length mismatch for id %r" % msg_id)
        return msg_id, decode_log_probs(msg["log_probs"])

    def score(self, pieces, mask_positions, targets):
        return self.score_batch([(pieces, mask_positions, targets)])[0]

    def score_batch(self, requests):
        """Score several requests with bounded in-flight pipelining."""
        results = [None] * len(requests)
        digests = [_request_digest(*req) for req in requests]
        todo = []
        for i, digest in enumerate(digests):
            if digest in self._cache:
                results[i] = self._cache[digest]
            else:
                todo.append(i)
        sent = {}
        cursor = 0
        while cursor < len(todo) or self._pending:
            while cursor < len(todo) and len(self._pending) < self.max_in_flight:
                i = todo[cursor]
                cursor += 1
                pieces, mask_positions, targets = requests[i]
                msg_id = "q%d" % self._next_id
                self._next_id += 1
                self._pending[msg_id] = len(targets)
                sent[msg_id] = i
                write_message(
                    self.transport.outfile,
                    {
                        "type": "score",
                        "id": msg_id,
                        "pieces": list(pieces),
                        "mask_positions": list(mask_positions),
                        "targets": list(targets),
                    },
                )
            if self._pending:
                msg_id, log_probs = self._recv_result()
                del self._pending[msg_id]
                i = sent.pop(msg_id)
                results[i] = log_probs
                self._cache[digests[i]] = log_probs
                if self._cache_file is not None:
                    self._cache_file.write(
                        json.dumps({"digest": digests[i], "log_probs": encode_log_probs(log_probs)})
                        + "\n"
                    )
                    self._cache_file.flush()
        return results

    def close(self):
        if self._cache_file is not None:
            self._cache_file.close()
        self._selector.close()
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def remote_scorer(endpoint, vocab, **kwargs):
    return RemoteScorer(endpoint, vocab, **kwargs)
