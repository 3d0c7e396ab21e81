/**
 * Server side of the newline-delimited JSON scorer protocol.
 *
 * Handshake:  {"type":"hello","protocol":1,"vocab_digest":"<hex>"} both ways.
 * Scoring:    {"type":"score","id":...,"pieces":[...],"mask_positions":[...],
 *              "targets":[...]}
 *         ->  {"type":"result","id":...,"log_probs":[...]}
 * log_probs are natural-log, finite or null (null encodes -inf). Failures
 * answer {"type":"error","id":...,"message":...} and keep the stream alive.
 */
import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";

export const PROTOCOL_VERSION = 1;

export interface WireScorer {
  vocabDigest: string;
  score(pieces: string[], maskPositions: number[], targets: string[]): Promise<(number | null)[]>;
}

function writeMessage(out: Writable, obj: unknown): void {
  out.write(JSON.stringify(obj) + "\n");
}

function validateScoreRequest(msg: Record<string, unknown>): void {
  for (const key of ["id", "pieces", "mask_positions", "targets"]) {
    if (!(key in msg)) throw new Error(`score request missing field '${key}'`);
  }
  const positions = msg.mask_positions;
  const targets = msg.targets;
  if (!Array.isArray(positions) || !Array.isArray(targets)) {
    throw new Error("mask_positions and targets must be arrays");
  }
  if (positions.length !== targets.length) {
    throw new Error("mask_positions and targets length mismatch");
  }
  if (!Array.isArray(msg.pieces)) throw new Error("pieces must be an array");
}

export function encodeLogProbs(values: (number | null)[]): (number | null)[] {
  return values.map((v) => {
    if (v === null || v === Number.NEGATIVE_INFINITY) return null;
    if (typeof v === "number" && Number.isFinite(v)) return v;
    throw new Error(`log_prob must be finite or -inf, got ${v}`);
  });
}

/** Answer handshake and score requests until EOF; one bad request never
 * kills the stream. Resolves when input ends. */
export function serve(scorer: WireScorer, input: Readable, output: Writable): Promise<void> {
  const rl = readline.createInterface({ input, terminal: false });
  let chain = Promise.resolve();
  return new Promise((resolve) => {
    rl.on("line", (line) => {
      // serialize handling so responses come out in request order
      chain = chain.then(async () => {
        if (!line.trim()) return;
        let msg: Record<string, unknown>;
        try {
          msg = JSON.parse(line);
        } catch (exc) {
          writeMessage(output, { type: "error", id: null, message: `malformed message: ${exc}` });
          return;
        }
        const msgId = msg && typeof msg === "object" ? (msg.id ?? null) : null;
        try {
          if (msg.type === "hello") {
            if (msg.protocol !== PROTOCOL_VERSION) {
              throw new Error(`unsupported protocol version ${JSON.stringify(msg.protocol)}`);
            }
            if (msg.vocab_digest !== scorer.vocabDigest) {
              throw new Error("vocab digest mismatch");
            }
            writeMessage(output, {
              type: "hello",
              protocol: PROTOCOL_VERSION,
              vocab_digest: scorer.vocabDigest,
            });
          } else if (msg.type === "score") {
            validateScoreRequest(msg);
            const logProbs = await scorer.score(
              msg.pieces as string[],
              msg.mask_positions as number[],
              msg.targets as string[],
            );
            writeMessage(output, {
              type: "result",
              id: msg.id,
              log_probs: encodeLogProbs(logProbs),
            });
          } else {
            throw new Error(`unknown message type ${JSON.stringify(msg.type)}`);
          }
        } catch (exc) {
          const message = exc instanceof Error ? exc.message : String(exc);
          writeMessage(output, { type: "error", id: msgId, message });
        }
      });
    });
    rl.on("close", () => {
      chain.then(resolve);
    });
  });
}
