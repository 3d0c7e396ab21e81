/**
 * Tiny masked-token model: mean context embedding plus a mask-position
 * feature feeds a one-hidden-layer MLP whose softmax ranges over the whole
 * vocabulary. Small enough to overfit a toy dataset in seconds, yet shaped
 * like the neural scorers the wire protocol fronts.
 */
import * as tf from "@tensorflow/tfjs";
import { MASK_TOKEN, UNK_TOKEN, Vocab } from "./vocab";

export interface ModelConfig {
  embeddingDim: number;
  hiddenDim: number;
  seed: number;
}

export const DEFAULT_MODEL_CONFIG: ModelConfig = { embeddingDim: 24, hiddenDim: 48, seed: 12345 };

/** mulberry32: deterministic init independent of tfjs RNG internals. */
function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function initMatrix(rng: () => number, rows: number, cols: number, scale: number): number[][] {
  const out: number[][] = [];
  for (let r = 0; r < rows; r++) {
    const row: number[] = [];
    for (let c = 0; c < cols; c++) row.push((rng() * 2 - 1) * scale);
    out.push(row);
  }
  return out;
}

export interface Weights {
  embeddings: tf.Variable<tf.Rank.R2>; // vocab x embeddingDim
  w1: tf.Variable<tf.Rank.R2>; // (embeddingDim + 1) x hiddenDim
  b1: tf.Variable<tf.Rank.R1>;
  w2: tf.Variable<tf.Rank.R2>; // hiddenDim x vocab
  b2: tf.Variable<tf.Rank.R1>;
}

export class MaskedTokenModel {
  readonly vocab: Vocab;
  readonly config: ModelConfig;
  readonly weights: Weights;

  constructor(vocab: Vocab, config: ModelConfig = DEFAULT_MODEL_CONFIG, init?: {
    embeddings: number[][]; w1: number[][]; b1: number[]; w2: number[][]; b2: number[];
  }) {
    this.vocab = vocab;
    this.config = config;
    const v = vocab.size;
    const d = config.embeddingDim;
    const h = config.hiddenDim;
    const rng = makeRng(config.seed);
    const e = init?.embeddings ?? initMatrix(rng, v, d, 0.5);
    const w1 = init?.w1 ?? initMatrix(rng, d + 1, h, 0.5);
    const w2 = init?.w2 ?? initMatrix(rng, h, v, 0.5);
    this.weights = {
      embeddings: tf.variable(tf.tensor2d(e)) as tf.Variable<tf.Rank.R2>,
      w1: tf.variable(tf.tensor2d(w1)) as tf.Variable<tf.Rank.R2>,
      b1: tf.variable(init?.b1 ? tf.tensor1d(init.b1) : tf.zeros([h])) as tf.Variable<tf.Rank.R1>,
      w2: tf.variable(tf.tensor2d(w2)) as tf.Variable<tf.Rank.R2>,
      b2: tf.variable(init?.b2 ? tf.tensor1d(init.b2) : tf.zeros([v])) as tf.Variable<tf.Rank.R1>,
    };
  }

  trainableVariables(): tf.Variable[] {
    const w = this.weights;
    return [w.embeddings, w.w1, w.b1, w.w2, w.b2];
  }

  private pieceId(piece: string): number {
    const id = this.vocab.pieceIds.get(piece);
    if (id !== undefined) return id;
    return this.vocab.pieceIds.get(UNK_TOKEN)!;
  }

  /**
   * Log-softmax rows over the vocabulary, one row per mask position.
   * Context is the bag of non-mask pieces; each row additionally sees its
   * mask position as a fraction of sequence length.
   */
  logProbRows(pieces: string[], maskPositions: number[]): tf.Tensor2D {
    return tf.tidy(() => {
      const contextIds = pieces
        .filter((p) => p !== MASK_TOKEN)
        .map((p) => this.pieceId(p));
      const d = this.config.embeddingDim;
      const contextEmb = contextIds.length
        ? tf.gather(this.weights.embeddings, tf.tensor1d(contextIds, "int32")).mean(0)
        : tf.zeros([d]);
      const rows = maskPositions.map((pos) => {
        const posFrac = pieces.length > 0 ? pos / pieces.length : 0;
        return tf.concat([contextEmb, tf.tensor1d([posFrac])]);
      });
      const x = tf.stack(rows) as tf.Tensor2D; // nMasks x (d+1)
      const hidden = tf.tanh(tf.add(tf.matMul(x, this.weights.w1), this.weights.b1));
      const logits = tf.add(tf.matMul(hidden, this.weights.w2), this.weights.b2);
      return tf.logSoftmax(logits) as tf.Tensor2D;
    });
  }

  /** Natural-log probability of each target piece at its mask position. */
  async scoreTargets(pieces: string[], maskPositions: number[], targets: string[]): Promise<(number | null)[]> {
    const rows = this.logProbRows(pieces, maskPositions);
    const data = (await rows.array()) as number[][];
    rows.dispose();
    return targets.map((t, i) => {
      const id = this.vocab.pieceIds.get(t);
      return id === undefined ? null : data[i][id];
    });
  }

  /** Differentiable mean target log-prob for one candidate (training path).
   * Callers wrap training steps in tf.tidy; nothing is disposed here so the
   * gradient tape keeps what it needs. */
  candidateLogProb(pieces: string[], maskPositions: number[], targets: string[]): tf.Scalar {
    const rows = this.logProbRows(pieces, maskPositions);
    const ids = targets.map((t) => this.pieceId(t));
    const oneHot = tf.oneHot(tf.tensor1d(ids, "int32"), this.vocab.size).cast("float32");
    const perMask = tf.sum(tf.mul(rows, oneHot), 1) as tf.Tensor1D;
    return perMask.mean() as tf.Scalar;
  }
}
