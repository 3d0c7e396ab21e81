/**
 * Wordpiece vocabulary: file loading, digest, and greedy longest-match
 * tokenization. Must agree byte-for-byte with the Python pipeline's rules
 * (lowercase lookup, "##" continuation prefix, sha256 digest over pieces
 * joined with newlines).
 */
import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export const MASK_TOKEN = "[MASK]";
export const UNK_TOKEN = "[UNK]";
export const SPECIAL_TOKENS = ["[MASK]", "[UNK]", "[CLS]", "[SEP]"];
export const CONTINUATION_PREFIX = "##";

const PUNCT_RE = /([.,!?;:"()\[\]{}])/g;

export class Vocab {
  readonly pieces: string[];
  readonly pieceIds: Map<string, number>;

  constructor(pieces: string[]) {
    const seen = new Set<string>();
    for (const p of pieces) {
      if (!p) throw new Error("empty piece");
      if (seen.has(p)) throw new Error(`duplicate piece: ${p}`);
      seen.add(p);
    }
    for (const special of SPECIAL_TOKENS) {
      if (!seen.has(special)) throw new Error(`missing special token: ${special}`);
    }
    this.pieces = [...pieces];
    this.pieceIds = new Map(pieces.map((p, i) => [p, i]));
  }

  get size(): number {
    return this.pieces.length;
  }

  has(piece: string): boolean {
    return this.pieceIds.has(piece);
  }

  digest(): string {
    return createHash("sha256").update(this.pieces.join("\n"), "utf-8").digest("hex");
  }
}

export function loadVocab(path: string): Vocab {
  const lines = readFileSync(path, "utf-8")
    .split("\n")
    .map((l) => l.replace(/\n$/, ""))
    .filter((l) => l.length > 0);
  return new Vocab(lines);
}

export function tokenizeWord(vocab: Vocab, word: string): string[] {
  if (!word || /\s/.test(word)) throw new Error(`word must be non-empty without whitespace: ${word}`);
  const lower = word.toLowerCase();
  const out: string[] = [];
  let start = 0;
  while (start < lower.length) {
    let end = lower.length;
    let match: string | null = null;
    while (start < end) {
      let piece = lower.slice(start, end);
      if (start > 0) piece = CONTINUATION_PREFIX + piece;
      if (vocab.has(piece)) {
        match = piece;
        break;
      }
      end -= 1;
    }
    if (match === null) return [UNK_TOKEN];
    out.push(match);
    start = end;
  }
  return out;
}

export function basicTokenize(text: string): string[] {
  return text.replace(PUNCT_RE, " $1 ").split(/\s+/).filter((w) => w.length > 0);
}

export function tokenizeText(vocab: Vocab, text: string): string[] {
  const pieces: string[] = [];
  for (const word of basicTokenize(text)) {
    pieces.push(...tokenizeWord(vocab, word));
  }
  return pieces;
}

/** Expand the single mask placeholder into k mask slots. */
export function buildMaskedPieces(
  vocab: Vocab,
  maskedText: string,
  k: number,
): { pieces: string[]; maskPositions: number[] } {
  const parts = maskedText.split(MASK_TOKEN);
  if (parts.length !== 2) throw new Error(`text must contain exactly one ${MASK_TOKEN}`);
  const pieces = tokenizeText(vocab, parts[0]);
  const maskPositions: number[] = [];
  for (let i = 0; i < k; i++) {
    maskPositions.push(pieces.length);
    pieces.push(MASK_TOKEN);
  }
  pieces.push(...tokenizeText(vocab, parts[1]));
  return { pieces, maskPositions };
}

export function tokenizeCandidate(vocab: Vocab, candidate: string): string[] {
  const pieces: string[] = [];
  for (const word of candidate.split(/\s+/).filter((w) => w.length > 0)) {
    pieces.push(...tokenizeWord(vocab, word));
  }
  return pieces;
}
