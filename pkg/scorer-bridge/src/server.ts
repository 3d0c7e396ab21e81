/**
 * CLI entry point: serve the masked-token model over stdio.
 *
 *   node dist/server.js --vocab vocab.txt [--checkpoint model.json]
 *                       [--seed N] [--embedding-dim N] [--hidden-dim N]
 *
 * Without a checkpoint a freshly initialized (deterministic, seeded) model
 * is served, which is enough for protocol conformance checks.
 */
import { parseArgs } from "node:util";
import { loadCheckpoint } from "./checkpoint";
import { DEFAULT_MODEL_CONFIG, MaskedTokenModel } from "./model";
import { serve, WireScorer } from "./protocol";
import { loadVocab } from "./vocab";

function buildModel(values: Record<string, string | undefined>): MaskedTokenModel {
  const vocab = loadVocab(values.vocab!);
  if (values.checkpoint) return loadCheckpoint(values.checkpoint, vocab);
  const config = {
    embeddingDim: values["embedding-dim"] ? parseInt(values["embedding-dim"], 10) : DEFAULT_MODEL_CONFIG.embeddingDim,
    hiddenDim: values["hidden-dim"] ? parseInt(values["hidden-dim"], 10) : DEFAULT_MODEL_CONFIG.hiddenDim,
    seed: values.seed ? parseInt(values.seed, 10) : DEFAULT_MODEL_CONFIG.seed,
  };
  return new MaskedTokenModel(vocab, config);
}

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      vocab: { type: "string" },
      checkpoint: { type: "string" },
      seed: { type: "string" },
      "embedding-dim": { type: "string" },
      "hidden-dim": { type: "string" },
    },
  });
  if (!values.vocab) {
    process.stderr.write("usage: server --vocab vocab.txt [--checkpoint model.json]\n");
    process.exit(1);
  }
  const model = buildModel(values);
  const scorer: WireScorer = {
    vocabDigest: model.vocab.digest(),
    score: (pieces, maskPositions, targets) => model.scoreTargets(pieces, maskPositions, targets),
  };
  await serve(scorer, process.stdin, process.stdout);
}

main().catch((exc) => {
  process.stderr.write(String(exc) + "\n");
  process.exit(1);
});
