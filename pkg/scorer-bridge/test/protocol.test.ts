/**
 * Wire protocol conformance against a real spawned server process: the same
 * contract the Python pipeline checks against its baseline server, plus the
 * full-vocab normalization sweep.
 */
import { ChildProcessWithoutNullStreams, execFileSync, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { loadVocab, Vocab } from "../src/vocab";

const VOCAB_PATH = join(__dirname, "..", "..", "tests", "data", "golden_vocab.txt");
const SERVER_JS = join(__dirname, "..", "dist", "server.js");

class LineClient {
  private proc: ChildProcessWithoutNullStreams;
  private rl: Interface;
  private queue: ((line: string) => void)[] = [];
  private buffered: string[] = [];

  constructor(args: string[]) {
    this.proc = spawn(process.execPath, args, { stdio: ["pipe", "pipe", "inherit"] });
    this.rl = createInterface({ input: this.proc.stdout });
    this.rl.on("line", (line) => {
      const waiter = this.queue.shift();
      if (waiter) waiter(line);
      else this.buffered.push(line);
    });
  }

  sendRaw(line: string): void {
    this.proc.stdin.write(line + "\n");
  }

  send(obj: unknown): void {
    this.sendRaw(JSON.stringify(obj));
  }

  recv(timeoutMs = 15000): Promise<Record<string, unknown>> {
    const next = this.buffered.shift();
    if (next !== undefined) return Promise.resolve(JSON.parse(next));
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("server response timeout")), timeoutMs);
      this.queue.push((line) => {
        clearTimeout(timer);
        resolve(JSON.parse(line));
      });
    });
  }

  async roundtrip(obj: unknown): Promise<Record<string, unknown>> {
    this.send(obj);
    return this.recv();
  }

  close(): void {
    this.proc.stdin.end();
    this.proc.kill();
  }
}

describe("neural scorer server", () => {
  let vocab: Vocab;
  let client: LineClient;

  beforeAll(async () => {
    vocab = loadVocab(VOCAB_PATH);
    client = new LineClient([SERVER_JS, "--vocab", VOCAB_PATH]);
    const hello = await client.roundtrip({
      type: "hello",
      protocol: 1,
      vocab_digest: vocab.digest(),
    });
    expect(hello.type).toBe("hello");
    expect(hello.protocol).toBe(1);
    expect(hello.vocab_digest).toBe(vocab.digest());
  });

  afterAll(() => {
    client.close();
  });

  it("matches the Python pipeline's vocab digest", () => {
    const pyDigest = execFileSync(
      "python3",
      ["-c",
       "import sys; from winomine.wordpiece import Vocab, load_vocab;" +
       "print(load_vocab(sys.argv[1]).digest())",
       VOCAB_PATH],
      { encoding: "utf-8" },
    ).trim();
    expect(vocab.digest()).toBe(pyDigest);
  });

  it("rejects a digest mismatch but keeps the stream alive", async () => {
    const err = await client.roundtrip({ type: "hello", protocol: 1, vocab_digest: "feed" });
    expect(err.type).toBe("error");
    expect(String(err.message)).toContain("digest");
    const ok = await client.roundtrip({ type: "hello", protocol: 1, vocab_digest: vocab.digest() });
    expect(ok.type).toBe("hello");
  });

  it("rejects an unsupported protocol version", async () => {
    const err = await client.roundtrip({ type: "hello", protocol: 2, vocab_digest: vocab.digest() });
    expect(err.type).toBe("error");
    expect(String(err.message)).toContain("protocol");
  });

  it("answers a two-mask score request with two log-probs", async () => {
    const reply = await client.roundtrip({
      type: "score",
      id: "t2",
      pieces: ["the", "[MASK]", "[MASK]", "was", "angry"],
      mask_positions: [1, 2],
      targets: ["dog", "cat"],
    });
    expect(reply.type).toBe("result");
    expect(reply.id).toBe("t2");
    const logProbs = reply.log_probs as number[];
    expect(logProbs).toHaveLength(2);
    for (const lp of logProbs) {
      expect(typeof lp).toBe("number");
      expect(lp).toBeLessThan(0);
    }
  });

  it("encodes unknown targets as null", async () => {
    const reply = await client.roundtrip({
      type: "score",
      id: "tnull",
      pieces: ["the", "[MASK]", "ran"],
      mask_positions: [1],
      targets: ["not-a-piece"],
    });
    expect(reply.type).toBe("result");
    expect(reply.log_probs).toEqual([null]);
  });

  it("is deterministic for a fixed request", async () => {
    const req = {
      type: "score",
      id: "d1",
      pieces: ["the", "dog", "[MASK]", "the", "cat"],
      mask_positions: [2],
      targets: ["chased"],
    };
    const first = await client.roundtrip(req);
    const second = await client.roundtrip({ ...req, id: "d2" });
    expect(second.log_probs).toEqual(first.log_probs);
  });

  it("answers malformed and invalid requests with errors, stream intact", async () => {
    client.sendRaw("{this is not json");
    const e1 = await client.recv();
    expect(e1.type).toBe("error");
    expect(e1.id).toBeNull();

    const e2 = await client.roundtrip({ type: "score", id: "m1", pieces: ["the"] });
    expect(e2.type).toBe("error");
    expect(e2.id).toBe("m1");

    const e3 = await client.roundtrip({ type: "bogus", id: "m2" });
    expect(e3.type).toBe("error");

    const e4 = await client.roundtrip({
      type: "score", id: "m3", pieces: ["the", "[MASK]"],
      mask_positions: [1], targets: ["dog", "cat"],
    });
    expect(e4.type).toBe("error");
    expect(String(e4.message)).toContain("length mismatch");

    const ok = await client.roundtrip({
      type: "score", id: "m4", pieces: ["the", "[MASK]", "ran"],
      mask_positions: [1], targets: ["dog"],
    });
    expect(ok.type).toBe("result");
  });

  it("full-vocab sweep at one position sums to 1 within 1e-4", async () => {
    const targets = vocab.pieces;
    const reply = await client.roundtrip({
      type: "score",
      id: "sweep",
      pieces: ["the", "[MASK]", "ran"],
      mask_positions: targets.map(() => 1),
      targets,
    });
    expect(reply.type).toBe("result");
    const logProbs = reply.log_probs as number[];
    expect(logProbs).toHaveLength(targets.length);
    const total = logProbs.reduce((acc, lp) => acc + Math.exp(lp), 0);
    expect(Math.abs(total - 1)).toBeLessThan(1e-4);
  });

  it("survives a 200-request pipelined burst", async () => {
    const ids: string[] = [];
    for (let i = 0; i < 200; i++) {
      const id = `b${i}`;
      ids.push(id);
      client.send({
        type: "score",
        id,
        pieces: ["the", "[MASK]", "was", "angry"],
        mask_positions: [1],
        targets: [vocab.pieces[4 + (i % (vocab.size - 4))]],
      });
    }
    for (const id of ids) {
      const reply = await client.recv();
      expect(reply.type).toBe("result");
      expect(reply.id).toBe(id);
      expect((reply.log_probs as unknown[]).length).toBe(1);
    }
  });
});
