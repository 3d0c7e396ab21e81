/**
 * Toy-scale fine-tuning of the masked-token model on the mining pipeline's
 * dataset files (newline-delimited JSON records with masked_text, candidates
 * and answer_idx). Optimizes the mean margin ranking loss over candidate
 * pairs, validates after every epoch, and retains the checkpoint with the
 * highest validation accuracy.
 *
 *   node dist/finetune.js --vocab vocab.txt --data train.ndjson \
 *       --validation dev.ndjson --out model.json [--metrics metrics.ndjson]
 *       [--alpha A] [--beta B] [--lr R] [--epochs N] [--batch-size N]
 *       [--seed N] [--margin-mode sum|max]
 */
import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";
import * as tf from "@tensorflow/tfjs";
import { saveCheckpoint } from "./checkpoint";
import { exampleLoss, LossParams, MarginMode, TrainingExample } from "./loss";
import { DEFAULT_MODEL_CONFIG, MaskedTokenModel } from "./model";
import { buildMaskedPieces, loadVocab, tokenizeCandidate } from "./vocab";

export interface FineTuneConfig {
  alpha: number;
  beta: number;
  learningRate: number;
  epochs: number;
  batchSize: number;
  seed: number;
  marginMode: MarginMode;
}

// Reference defaults sized for full-scale training; toy runs override the
// rate and epoch count (5e-6 over 30 epochs will not move a randomly
// initialized toy model anywhere useful).
export const DEFAULT_FINETUNE_CONFIG: FineTuneConfig = {
  alpha: 20.0,
  beta: 0.2,
  learningRate: 5e-6,
  epochs: 30,
  batchSize: 64,
  seed: 12345,
  marginMode: "sum",
};

export interface EpochMetrics {
  epoch: number;
  trainLoss: number;
  trainAccuracy: number;
  valAccuracy: number;
}

export interface FineTuneResult {
  metrics: EpochMetrics[];
  bestEpoch: number; // 1-based, matching the metrics records
  firstBatchLoss: number;
}

function validateConfig(config: FineTuneConfig): void {
  if (config.learningRate <= 0) throw new Error("learning rate must be positive");
  if (config.epochs <= 0 || !Number.isInteger(config.epochs)) throw new Error("epochs must be a positive integer");
  if (config.batchSize <= 0 || !Number.isInteger(config.batchSize)) throw new Error("batch size must be a positive integer");
  if (config.alpha < 0 || config.beta < 0) throw new Error("alpha and beta must be non-negative");
}

export function loadDataset(path: string): TrainingExample[] {
  const out: TrainingExample[] = [];
  const lines = readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, lineno) => {
    if (!line.trim()) return;
    let obj: Record<string, unknown>;
    try {
      obj = JSON.parse(line);
    } catch (exc) {
      throw new Error(`${path}:${lineno + 1}: malformed record: ${exc}`);
    }
    const { id, masked_text: maskedText, candidates, answer_idx: answerIdx } = obj as {
      id?: unknown; masked_text?: unknown; candidates?: unknown; answer_idx?: unknown;
    };
    if (typeof id !== "string" || typeof maskedText !== "string" || !Array.isArray(candidates)
        || typeof answerIdx !== "number") {
      throw new Error(`${path}:${lineno + 1}: record missing required fields`);
    }
    if (candidates.length < 2) {
      throw new Error(`${path}:${lineno + 1}: example needs at least one distractor`);
    }
    if (answerIdx < 0 || answerIdx >= candidates.length) {
      throw new Error(`${path}:${lineno + 1}: answer_idx out of range`);
    }
    out.push({ id, maskedText, candidates: candidates as string[], answerIdx });
  });
  return out;
}

/** Highest-accuracy epoch, first one on ties (0-based index). */
export function bestEpochIndex(valAccuracies: number[]): number {
  let best = 0;
  for (let i = 1; i < valAccuracies.length; i++) {
    if (valAccuracies[i] > valAccuracies[best]) best = i;
  }
  return best;
}

/** Mean target log-prob per candidate; unknown target pieces score -inf. */
export async function candidateScores(model: MaskedTokenModel, example: TrainingExample): Promise<number[]> {
  const scores: number[] = [];
  for (const cand of example.candidates) {
    const targets = tokenizeCandidate(model.vocab, cand);
    const { pieces, maskPositions } = buildMaskedPieces(model.vocab, example.maskedText, targets.length);
    const logProbs = await model.scoreTargets(pieces, maskPositions, targets);
    const vals = logProbs.map((v) => (v === null ? Number.NEGATIVE_INFINITY : v));
    scores.push(vals.reduce((a, b) => a + b, 0) / vals.length);
  }
  return scores;
}

async function accuracy(model: MaskedTokenModel, examples: TrainingExample[]): Promise<number> {
  if (examples.length === 0) return 0;
  let correct = 0;
  for (const ex of examples) {
    const scores = await candidateScores(model, ex);
    if (scores.indexOf(Math.max(...scores)) === ex.answerIdx) correct++;
  }
  return correct / examples.length;
}

function batchLoss(
  model: MaskedTokenModel,
  batch: TrainingExample[],
  params: LossParams,
  marginMode: MarginMode,
): tf.Scalar {
  const losses = batch.map((ex) => exampleLoss(model, ex, params, marginMode));
  return tf.mean(tf.stack(losses)) as tf.Scalar;
}

export interface FineTuneSink {
  (metrics: EpochMetrics): void;
}

export async function finetune(
  model: MaskedTokenModel,
  train: TrainingExample[],
  validation: TrainingExample[],
  config: FineTuneConfig,
  checkpointPath?: string,
  onEpoch?: FineTuneSink,
): Promise<FineTuneResult> {
  validateConfig(config);
  if (train.length === 0) throw new Error("empty training set");
  const params: LossParams = { alpha: config.alpha, beta: config.beta };
  const optimizer = tf.train.adam(config.learningRate);
  const metrics: EpochMetrics[] = [];
  let firstBatchLoss: number | null = null;
  let bestAccuracy = Number.NEGATIVE_INFINITY;
  let bestEpoch = 0;
  try {
    for (let epoch = 1; epoch <= config.epochs; epoch++) {
      const lossSum: number[] = [];
      for (let start = 0; start < train.length; start += config.batchSize) {
        const batch = train.slice(start, start + config.batchSize);
        const lossVal = optimizer.minimize(
          () => tf.tidy(() => batchLoss(model, batch, params, config.marginMode)),
          true,
          model.trainableVariables(),
        )!;
        const loss = (await lossVal.data())[0];
        lossVal.dispose();
        if (!Number.isFinite(loss)) {
          throw new Error(`non-finite loss ${loss} at epoch ${epoch}, batch offset ${start}`);
        }
        if (firstBatchLoss === null) firstBatchLoss = loss;
        lossSum.push(loss * batch.length);
      }
      const record: EpochMetrics = {
        epoch,
        trainLoss: lossSum.reduce((a, b) => a + b, 0) / train.length,
        trainAccuracy: await accuracy(model, train),
        valAccuracy: await accuracy(model, validation),
      };
      metrics.push(record);
      if (onEpoch) onEpoch(record);
      if (record.valAccuracy > bestAccuracy) {
        bestAccuracy = record.valAccuracy;
        bestEpoch = epoch;
        if (checkpointPath) await saveCheckpoint(model, checkpointPath);
      }
    }
  } finally {
    optimizer.dispose();
  }
  return { metrics, bestEpoch, firstBatchLoss: firstBatchLoss! };
}

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      vocab: { type: "string" },
      data: { type: "string" },
      validation: { type: "string" },
      out: { type: "string" },
      metrics: { type: "string" },
      alpha: { type: "string" },
      beta: { type: "string" },
      lr: { type: "string" },
      epochs: { type: "string" },
      "batch-size": { type: "string" },
      seed: { type: "string" },
      "margin-mode": { type: "string" },
      "embedding-dim": { type: "string" },
      "hidden-dim": { type: "string" },
    },
  });
  if (!values.vocab || !values.data || !values.validation || !values.out) {
    process.stderr.write(
      "usage: finetune --vocab vocab.txt --data train.ndjson --validation dev.ndjson --out model.json\n",
    );
    process.exit(1);
  }
  const config: FineTuneConfig = {
    ...DEFAULT_FINETUNE_CONFIG,
    ...(values.alpha ? { alpha: parseFloat(values.alpha) } : {}),
    ...(values.beta ? { beta: parseFloat(values.beta) } : {}),
    ...(values.lr ? { learningRate: parseFloat(values.lr) } : {}),
    ...(values.epochs ? { epochs: parseInt(values.epochs, 10) } : {}),
    ...(values["batch-size"] ? { batchSize: parseInt(values["batch-size"], 10) } : {}),
    ...(values.seed ? { seed: parseInt(values.seed, 10) } : {}),
    ...(values["margin-mode"] ? { marginMode: values["margin-mode"] as MarginMode } : {}),
  };
  if (config.marginMode !== "sum" && config.marginMode !== "max") {
    throw new Error("margin-mode must be 'sum' or 'max'");
  }
  const vocab = loadVocab(values.vocab);
  const modelConfig = {
    embeddingDim: values["embedding-dim"]
      ? parseInt(values["embedding-dim"], 10)
      : DEFAULT_MODEL_CONFIG.embeddingDim,
    hiddenDim: values["hidden-dim"] ? parseInt(values["hidden-dim"], 10) : DEFAULT_MODEL_CONFIG.hiddenDim,
    seed: config.seed,
  };
  const model = new MaskedTokenModel(vocab, modelConfig);
  const train = loadDataset(values.data);
  const validation = loadDataset(values.validation);
  const metricsLines: string[] = [];
  const result = await finetune(model, train, validation, config, values.out, (m) => {
    const line = JSON.stringify({
      epoch: m.epoch,
      train_loss: m.trainLoss,
      train_accuracy: m.trainAccuracy,
      val_accuracy: m.valAccuracy,
    });
    metricsLines.push(line);
    process.stderr.write(line + "\n");
  });
  if (values.metrics) writeFileSync(values.metrics, metricsLines.join("\n") + "\n");
  process.stderr.write(`best epoch: ${result.bestEpoch}\n`);
}

if (require.main === module) {
  main().catch((exc) => {
    process.stderr.write(String(exc) + "\n");
    process.exit(1);
  });
}
