/**
 * Margin ranking loss over candidate pairs, matching the scorer pipeline's
 * formula exactly: L = -logpCorrect + alpha * max(0, logpIncorrect -
 * logpCorrect + beta). With several distractors the margin term is summed
 * over all of them by default; "max" keeps only the hardest distractor.
 */
import * as tf from "@tensorflow/tfjs";
import { MaskedTokenModel } from "./model";
import { buildMaskedPieces, tokenizeCandidate } from "./vocab";

export type MarginMode = "sum" | "max";

export interface LossParams {
  alpha: number;
  beta: number;
}

export const DEFAULT_LOSS_PARAMS: LossParams = { alpha: 20.0, beta: 0.2 };

export function pairLoss(logpCorrect: number, logpIncorrect: number, params: LossParams): number {
  return -logpCorrect + params.alpha * Math.max(0, logpIncorrect - logpCorrect + params.beta);
}

export interface TrainingExample {
  id: string;
  maskedText: string;
  candidates: string[];
  answerIdx: number;
}

/** Differentiable Eq-style loss for one example; call under tf.tidy. */
export function exampleLoss(
  model: MaskedTokenModel,
  example: TrainingExample,
  params: LossParams,
  marginMode: MarginMode = "sum",
): tf.Scalar {
  const scores: tf.Scalar[] = example.candidates.map((cand) => {
    const targets = tokenizeCandidate(model.vocab, cand);
    const { pieces, maskPositions } = buildMaskedPieces(model.vocab, example.maskedText, targets.length);
    return model.candidateLogProb(pieces, maskPositions, targets);
  });
  const correct = scores[example.answerIdx];
  const margins: tf.Scalar[] = [];
  for (let i = 0; i < scores.length; i++) {
    if (i === example.answerIdx) continue;
    margins.push(tf.relu(tf.add(tf.sub(scores[i], correct), params.beta)) as tf.Scalar);
  }
  const marginTerm =
    marginMode === "max"
      ? (tf.max(tf.stack(margins)) as tf.Scalar)
      : (tf.sum(tf.stack(margins)) as tf.Scalar);
  return tf.add(tf.neg(correct), tf.mul(params.alpha, marginTerm)) as tf.Scalar;
}

/** Non-differentiable restatement from plain numbers, for cross-checks. */
export function exampleLossFromScores(
  scores: number[],
  answerIdx: number,
  params: LossParams,
  marginMode: MarginMode = "sum",
): number {
  const correct = scores[answerIdx];
  const margins = scores
    .filter((_, i) => i !== answerIdx)
    .map((s) => Math.max(0, s - correct + params.beta));
  const marginTerm = marginMode === "max" ? Math.max(...margins) : margins.reduce((a, b) => a + b, 0);
  return -correct + params.alpha * marginTerm;
}
