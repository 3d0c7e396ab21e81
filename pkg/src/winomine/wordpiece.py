"""Subword tokenization with greedy longest-match-first lookup.

Pieces after the first carry a "##" continuation prefix. Words are
lowercased before lookup (uncased vocabulary convention).
"""

import hashlib
import re

CONTINUATION_PREFIX = "##"
SPECIAL_TOKENS = ("[MASK]", "[UNK]", "[CLS]", "[SEP]")
MASK_TOKEN = "[MASK]"
UNK_TOKEN = "[UNK]"

_PUNCT_RE = re.compile(r"([.,!?;:\"()\[\]{}])")


class VocabError(ValueError):
    pass


class Vocab:
    """Immutable piece inventory; line number in the source file is the piece id."""

    def __init__(self, pieces):
        seen = set()
        for p in pieces:
            if not p:
                raise VocabError("empty piece")
            if p in seen:
                raise VocabError("duplicate piece: %r" % p)
            seen.add(p)
        for special in SPECIAL_TOKENS:
            if special not in seen:
                raise VocabError("missing special token: %s" % special)
        self.pieces = tuple(pieces)
        self.piece_ids = {p: i for i, p in enumerate(self.pieces)}
        self.specials = frozenset(SPECIAL_TOKENS)

    def __contains__(self, piece):
        return piece in self.piece_ids

    def __len__(self):
        return len(self.pieces)

    def content_pieces(self):
        return [p for p in self.pieces if p not in self.specials]

    def digest(self):
        """Hex digest identifying the vocab; sha256 over pieces joined by newlines."""
        return hashlib.sha256("\n".join(self.pieces).encode("utf-8")).hexdigest()


def load_vocab(path):
    with open(path, encoding="utf-8") as f:
        pieces = [line.rstrip("\n") for line in f if line.rstrip("\n")]
    return Vocab(pieces)


def tokenize_word(vocab, word):
    """Greedy longest-match decomposition of a single word into pieces.

    Returns [UNK_TOKEN] when no decomposition exists.
    """
    if not word or any(c.isspace() for c in word):
        raise ValueError("word must be non-empty without whitespace: %r" % word)
    word = word.lower()
    out = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION_PREFIX + piece
            if piece in vocab:
                match = piece
                break
            end -= 1
        if match is None:
            return [UNK_TOKEN]
        out.append(match)
        start = end
    return out


def basic_tokenize(text):
    """Split raw text into word tokens; punctuation becomes its own token.

    Internal apostrophes are kept so contractions stay single tokens.
    """
    return _PUNCT_RE.sub(r" \1 ", text).split()


def tokenize_text(vocab, text):
    """Tokenize free text: basic word split, then per-word piece lookup."""
    pieces = []
    for word in basic_tokenize(text):
        pieces.extend(tokenize_word(vocab, word))
    return pieces


def whole_word_fraction(vocab, text, denominator="pieces"):
    """Share of the text's pieces accounted for by single-piece words.

    denominator="pieces" divides by the total piece count; "words" divides by
    the word count instead.
    """
    words = basic_tokenize(text)
    if not words:
        raise ValueError("empty text")
    whole = 0
    total_pieces = 0
    for word in words:
        pieces = tokenize_word(vocab, word)
        total_pieces += len(pieces)
        if len(pieces) == 1 and pieces[0] != UNK_TOKEN:
            whole += 1
    if denominator == "words":
        return whole / len(words)
    return whole / total_pieces
