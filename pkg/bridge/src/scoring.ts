/**
 * Candidate scoring for the decoder wire protocol.
 *
 * Prompt rendering, byte for byte: the context is
 * BOS + utf8("<question>\n<prefix>") and a candidate chunk continues as
 * utf8(" <chunk>") when the prefix is non-empty, utf8("<chunk>")
 * otherwise. The special candidate "END" scores the EOS token. This is
 * exactly the rendering the trainer optimizes, so trained adapters score
 * what they saw.
 */

import { Model } from './model.js';
import { BOS, EOS, encode } from './tokenizer.js';

export const END_CANDIDATE = 'END';

export function scoreCandidates(
  model: Model,
  question: string,
  prefix: string,
  candidates: string[],
): number[] {
  const context = [BOS, ...encode(`${question}\n${prefix}`)];
  return candidates.map((candidate) => {
    const continuation =
      candidate === END_CANDIDATE
        ? [EOS]
        : encode(prefix.length > 0 ? ` ${candidate}` : candidate);
    return model.continuationLogProb(context, continuation);
  });
}

/** Mean per-token log-probability of a full program given a question. */
export function goldProgramLogProb(model: Model, question: string, program: string): number {
  const context = [BOS, ...encode(`${question}\n`)];
  const continuation = [...encode(program), EOS];
  return model.continuationLogProb(context, continuation) / continuation.length;
}
