/**
 * JSON checkpoint layout: one file holding the model config, the vocab
 * digest it was trained against, and every weight matrix as nested arrays.
 * Small models only; simplicity and diffability beat compactness here.
 */
import { readFileSync, renameSync, writeFileSync } from "node:fs";
import { MaskedTokenModel, ModelConfig } from "./model";
import { Vocab } from "./vocab";

interface CheckpointFile {
  config: ModelConfig;
  vocabDigest: string;
  weights: {
    embeddings: number[][];
    w1: number[][];
    b1: number[];
    w2: number[][];
    b2: number[];
  };
}

export async function saveCheckpoint(model: MaskedTokenModel, path: string): Promise<void> {
  const w = model.weights;
  const payload: CheckpointFile = {
    config: model.config,
    vocabDigest: model.vocab.digest(),
    weights: {
      embeddings: (await w.embeddings.array()) as number[][],
      w1: (await w.w1.array()) as number[][],
      b1: (await w.b1.array()) as number[],
      w2: (await w.w2.array()) as number[][],
      b2: (await w.b2.array()) as number[],
    },
  };
  const tmp = path + ".tmp";
  writeFileSync(tmp, JSON.stringify(payload));
  renameSync(tmp, path);
}

export function loadCheckpoint(path: string, vocab: Vocab): MaskedTokenModel {
  const payload = JSON.parse(readFileSync(path, "utf-8")) as CheckpointFile;
  if (payload.vocabDigest !== vocab.digest()) {
    throw new Error("checkpoint was trained against a different vocab");
  }
  return new MaskedTokenModel(vocab, payload.config, payload.weights);
}
