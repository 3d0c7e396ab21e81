"""Corpus ingestion: sentence segmentation, word tokenization, POS tagging.

Two input formats:
  plain     — one document per line, segmented and tagged here
  pretagged — "word/TAG" fields separated by spaces, blank line ends a
              sentence, "# doc <id>" starts a new document
"""

import re
from dataclasses import dataclass
from importlib import resources

from .wordpiece import basic_tokenize

NOUN_TAGS = frozenset({"NN", "NNS", "NNP", "NNPS"})

_TERMINATORS = ".!?"
_NUMBER_RE = re.compile(r"^[\d.,]*\d[\d.,]*$")


class CorpusFormatError(ValueError):
    """Malformed corpus content; carries the offending line number."""

    def __init__(self, message, line_no=None):
        super().__init__(message if line_no is None else "line %d: %s" % (line_no, message))
        self.line_no = line_no


@dataclass(frozen=True)
class SentenceRecord:
    doc_id: str
    sent_idx: int
    words: tuple
    pos_tags: tuple
    raw_text: str

    def __post_init__(self):
        if len(self.words) != len(self.pos_tags) or not self.words:
            raise ValueError(
                "words/pos_tags must be equal-length and non-empty (doc %s sent %d)"
                % (self.doc_id, self.sent_idx)
            )


def detokenize(words):
    """The module's detokenization rule: single-space join."""
    return " ".join(words)


def _default_data(name):
    return resources.files("winomine.data").joinpath(name).read_text(encoding="utf-8")


def load_abbreviations(path=None):
    if path is None:
        text = _default_data("abbreviations.txt")
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def segment_sentences(text, abbreviations=None):
    """Rule-based splitter: break after {., !, ?} followed by whitespace and an
    uppercase letter or quote, unless the preceding token is a known abbreviation.
    """
    if abbreviations is None:
        abbreviations = load_abbreviations()
    sentences = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in _TERMINATORS:
            j = i + 1
            while j < n and text[j] in "\"')":
                j += 1
            if j < n and text[j].isspace():
                k = j
                while k < n and text[k].isspace():
                    k += 1
                if k < n and (text[k].isupper() or text[k] in "\"'"):
                    token = text[start:i + 1].split()[-1] if text[start:i + 1].split() else ""
                    if not (c == "." and token in abbreviations):
                        sentences.append(text[start:j].strip())
                        start = k
                        i = k
                        continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


class BaselineTagger:
    """Closed-class lexicon plus suffix/capitalization heuristics.

    A stand-in for a full statistical tagger; deterministic for a fixed
    lexicon file. Unknown words default to NN so noun recall stays high.
    """

    def __init__(self, lexicon_path=None):
        if lexicon_path is None:
            text = _default_data("tagger_lexicon.txt")
        else:
            with open(lexicon_path, encoding="utf-8") as f:
                text = f.read()
        self.lexicon = {}
        for line_no, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusFormatError("lexicon line needs 'word<TAB>TAG'", line_no)
            self.lexicon[parts[0].lower()] = parts[1]

    def tag(self, words):
        if not words:
            raise ValueError("cannot tag an empty word list")
        return tuple(self._tag_one(w, i) for i, w in enumerate(words))

    def _tag_one(self, word, position):
        lower = word.lower()
        if lower in self.lexicon:
            return self.lexicon[lower]
        if _NUMBER_RE.match(word):
            return "CD"
        if all(not c.isalnum() for c in word):
            return "." if word in _TERMINATORS else ":"
        # capitalized off sentence start: proper noun
        if position > 0 and word[:1].isupper():
            return "NNP"
        if lower.endswith("ly"):
            return "RB"
        if lower.endswith("ing") and len(lower) > 4:
            return "VBG"
        if lower.endswith("ed") and len(lower) > 3:
            return "VBD"
        if lower.endswith("s") and not lower.endswith(("ss", "us", "is")) and len(lower) > 3:
            return "NNS"
        return "NN"


def tag_pos(words, tagger=None):
    if tagger is None:
        tagger = BaselineTagger()
    return tagger.tag(words)


def noun_positions(record):
    return [i for i, tag in enumerate(record.pos_tags) if tag in NOUN_TAGS]


def _parse_pretagged(lines, on_error):
    doc_id = "doc0"
    sent_idx = 0
    for line_no, line in enumerate(lines, 1):
        line = line.strip()
        if line.startswith("# doc "):
            doc_id = line[len("# doc "):].strip()
            sent_idx = 0
            continue
        if not line:
            continue
        try:
            words = []
            tags = []
            for fld in line.split():
                slash = fld.rfind("/")
                if slash <= 0 or slash == len(fld) - 1:
                    raise CorpusFormatError("malformed word/TAG field: %r" % fld, line_no)
                words.append(fld[:slash])
                tags.append(fld[slash + 1:])
            record = SentenceRecord(doc_id, sent_idx, tuple(words), tuple(tags), detokenize(words))
        except CorpusFormatError as exc:
            if on_error is None:
                raise
            on_error(exc)
            continue
        yield record
        sent_idx += 1


def _parse_plain(lines, tagger, abbreviations):
    for line_no, line in enumerate(lines, 1):
        doc = line.strip()
        if not doc:
            continue
        doc_id = "line%d" % line_no
        for sent_idx, sentence in enumerate(segment_sentences(doc, abbreviations)):
            words = tuple(basic_tokenize(sentence))
            if not words:
                continue
            yield SentenceRecord(doc_id, sent_idx, words, tagger.tag(words), sentence)


def load_corpus(path, fmt="pretagged", tagger=None, abbreviations=None, on_error=None):
    """Yield SentenceRecords from a corpus file in file order.

    Record-level parse errors are reported through on_error(exc) and skipped;
    without a handler they propagate.
    """
    with open(path, encoding="utf-8") as f:
        lines = f.readlines()
    if fmt == "pretagged":
        yield from _parse_pretagged(lines, on_error)
    elif fmt == "plain":
        yield from _parse_plain(lines, tagger or BaselineTagger(), abbreviations)
    else:
        raise ValueError("unknown corpus format: %r" % fmt)
