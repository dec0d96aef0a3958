/**
 * Byte-level tokenizer: ids 0..255 are raw bytes, then BOS/EOS.
 *
 * Byte granularity keeps the vocabulary fixed for any KB surface form,
 * which matters because adapter corpora contain arbitrary schema names.
 */

export const BYTE_VOCAB = 256;
export const BOS = 256;
export const EOS = 257;
export const VOCAB_SIZE = 258;

const encoder = new TextEncoder();
const decoder = new TextDecoder();

export function encode(text: string): number[] {
  return Array.from(encoder.encode(text));
}

export function decode(ids: number[]): string {
  return decoder.decode(Uint8Array.from(ids.filter((t) => t < BYTE_VOCAB)));
}

/** Training sequence: BOS context target EOS, loss over target+EOS. */
export function buildExample(
  context: string,
  target: string,
  maxLen: number,
): { tokens: number[]; lossMask: boolean[] } {
  const tokens = [BOS, ...encode(context), ...encode(target), EOS];
  const contextLen = 1 + encode(context).length;
  const clipped = tokens.slice(0, maxLen);
  // positions whose *next token* is part of the target contribute loss
  const lossMask = clipped.map((_, i) => i + 1 >= contextLen && i + 1 < clipped.length);
  return { tokens: clipped, lossMask };
}
