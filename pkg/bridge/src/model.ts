/**
 * Tiny causal transformer LM with pluggable low-rank adapters.
 *
 * The base weights are created from a seed and frozen forever; adapters
 * are the only trainable parameters. Plugging adapters never touches W:
 * each linear computes x*W^T plus the active adapters' low-rank paths,
 * so unplugging is exact. Backward propagates through the whole network
 * but accumulates gradients only for the single trainable adapter.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { createHash } from 'node:crypto';

import { LoraAdapter } from './lora.js';
import {
  Matrix,
  addInPlace,
  logSoftmaxRow,
  matmul,
  matmulTransposeA,
  matmulTransposeB,
  randomMatrix,
  rng,
  zeros,
} from './tensor.js';
import { VOCAB_SIZE } from './tokenizer.js';

export interface ModelConfig {
  vocab: number;
  dModel: number;
  nLayers: number;
  nHeads: number;
  dFF: number;
  maxSeq: number;
}

export const TOY_CONFIG: ModelConfig = {
  vocab: VOCAB_SIZE,
  dModel: 48,
  nLayers: 2,
  nHeads: 2,
  dFF: 96,
  maxSeq: 192,
};

interface LayerWeights {
  wq: Matrix;
  wk: Matrix;
  wv: Matrix;
  wo: Matrix;
  w1: Matrix;
  w2: Matrix;
}

const RMS_EPS = 1e-5;

export interface GradPair {
  a: Matrix;
  b: Matrix;
}

export type GradStore = Map<string, GradPair>;

export function makeGradStore(adapter: LoraAdapter): GradStore {
  const store: GradStore = new Map();
  for (const [name, pair] of adapter.modules) {
    store.set(name, { a: zeros(pair.a.rows, pair.a.cols), b: zeros(pair.b.rows, pair.b.cols) });
  }
  return store;
}

/** Which base matrices an adapter may target, with shapes. */
export function targetModules(cfg: ModelConfig): Array<{ module: string; dOut: number; dIn: number }> {
  const out = [];
  for (let i = 0; i < cfg.nLayers; i++) {
    for (const name of ['wq', 'wk', 'wv', 'wo'] as const) {
      out.push({ module: `layer${i}.${name}`, dOut: cfg.dModel, dIn: cfg.dModel });
    }
    out.push({ module: `layer${i}.w1`, dOut: cfg.dFF, dIn: cfg.dModel });
    out.push({ module: `layer${i}.w2`, dOut: cfg.dModel, dIn: cfg.dFF });
  }
  return out;
}

interface LinearTape {
  input: Matrix;
}

interface LayerTape {
  attnInput: Matrix;
  attnNormed: Matrix;
  q: Matrix;
  k: Matrix;
  v: Matrix;
  probs: Matrix[]; // per head, (L,L)
  context: Matrix;
  mlpInput: Matrix;
  mlpNormed: Matrix;
  hidden: Matrix; // post-relu
}

interface Tape {
  tokens: number[];
  embedded: Matrix;
  layers: LayerTape[];
  final: Matrix; // pre final norm
  normed: Matrix;
  logits: Matrix;
}

function rmsNormForward(x: Matrix): Matrix {
  const out = zeros(x.rows, x.cols);
  for (let i = 0; i < x.rows; i++) {
    let sumSq = 0;
    const row = i * x.cols;
    for (let j = 0; j < x.cols; j++) sumSq += x.data[row + j] * x.data[row + j];
    const inv = 1 / Math.sqrt(sumSq / x.cols + RMS_EPS);
    for (let j = 0; j < x.cols; j++) out.data[row + j] = x.data[row + j] * inv;
  }
  return out;
}

function rmsNormBackward(dOut: Matrix, x: Matrix): Matrix {
  const dX = zeros(x.rows, x.cols);
  const d = x.cols;
  for (let i = 0; i < x.rows; i++) {
    const row = i * d;
    let sumSq = 0;
    for (let j = 0; j < d; j++) sumSq += x.data[row + j] * x.data[row + j];
    const ms = sumSq / d + RMS_EPS;
    const inv = 1 / Math.sqrt(ms);
    let dot = 0;
    for (let j = 0; j < d; j++) dot += dOut.data[row + j] * x.data[row + j];
    const k = dot / (d * ms * Math.sqrt(ms));
    for (let j = 0; j < d; j++) {
      dX.data[row + j] = dOut.data[row + j] * inv - x.data[row + j] * k;
    }
  }
  return dX;
}

export class Model {
  readonly cfg: ModelConfig;
  readonly id: string;
  private embed: Matrix;
  private pos: Matrix;
  private layers: LayerWeights[];
  private active: LoraAdapter[] = [];
  private trainable: LoraAdapter | null = null;
  private grads: GradStore | null = null;

  constructor(cfg: ModelConfig, seed: number) {
    this.cfg = cfg;
    const next = rng(seed);
    const scale = 0.08;
    this.embed = randomMatrix(cfg.vocab, cfg.dModel, scale, next);
    this.pos = randomMatrix(cfg.maxSeq, cfg.dModel, scale, next);
    this.layers = [];
    for (let i = 0; i < cfg.nLayers; i++) {
      this.layers.push({
        wq: randomMatrix(cfg.dModel, cfg.dModel, scale, next),
        wk: randomMatrix(cfg.dModel, cfg.dModel, scale, next),
        wv: randomMatrix(cfg.dModel, cfg.dModel, scale, next),
        wo: randomMatrix(cfg.dModel, cfg.dModel, scale, next),
        w1: randomMatrix(cfg.dFF, cfg.dModel, scale, next),
        w2: randomMatrix(cfg.dModel, cfg.dFF, scale, next),
      });
    }
    this.id = `tiny-${seed}-${this.weightDigest().slice(0, 8)}`;
  }

  weightDigest(): string {
    const hash = createHash('sha256');
    const feed = (m: Matrix) => hash.update(Buffer.from(m.data.buffer, m.data.byteOffset, m.data.byteLength));
    feed(this.embed);
    feed(this.pos);
    for (const l of this.layers) [l.wq, l.wk, l.wv, l.wo, l.w1, l.w2].forEach(feed);
    return hash.digest('hex');
  }

  paramCount(): number {
    let n = this.embed.data.length + this.pos.data.length;
    for (const l of this.layers) {
      n += l.wq.data.length + l.wk.data.length + l.wv.data.length + l.wo.data.length;
      n += l.w1.data.length + l.w2.data.length;
    }
    return n;
  }

  /** Replace the active adapter set; at most one may be trainable. */
  plug(adapters: LoraAdapter[], trainableName?: string): void {
    for (const a of adapters) {
      if (a.baseModelId !== this.id) {
        throw new Error(`adapter ${a.name} was trained for ${a.baseModelId}, not ${this.id}`);
      }
    }
    this.active = [...adapters];
    this.trainable = null;
    if (trainableName !== undefined) {
      this.trainable = adapters.find((a) => a.name === trainableName) ?? null;
      if (!this.trainable) throw new Error(`no active adapter named ${trainableName}`);
    }
  }

  unplug(): void {
    this.active = [];
    this.trainable = null;
  }

  activeAdapterNames(): string[] {
    return this.active.map((a) => a.name);
  }

  setGradStore(grads: GradStore | null): void {
    this.grads = grads;
  }

  private linearForward(x: Matrix, w: Matrix, module: string): Matrix {
    const y = matmulTransposeB(x, w);
    for (const adapter of this.active) {
      const pair = adapter.modules.get(module);
      if (!pair) continue;
      const xb = matmulTransposeB(x, pair.b);
      addInPlace(y, matmulTransposeB(xb, pair.a));
    }
    return y;
  }

  private linearBackward(dY: Matrix, tape: LinearTape, w: Matrix, module: string): Matrix {
    const dX = matmul(dY, w);
    for (const adapter of this.active) {
      const pair = adapter.modules.get(module);
      if (!pair) continue;
      const dya = matmul(dY, pair.a); // (L, r)
      addInPlace(dX, matmul(dya, pair.b));
      if (adapter === this.trainable && this.grads) {
        const g = this.grads.get(module)!;
        const xb = matmulTransposeB(tape.input, pair.b); // (L, r)
        addInPlace(g.a, matmulTransposeA(dY, xb));
        addInPlace(g.b, matmulTransposeA(dya, tape.input));
      }
    }
    return dX;
  }

  forward(tokens: number[]): Tape {
    const { dModel, nHeads, maxSeq } = this.cfg;
    if (tokens.length > maxSeq) throw new Error(`sequence ${tokens.length} exceeds maxSeq ${maxSeq}`);
    const L = tokens.length;
    const dHead = dModel / nHeads;
    const x = zeros(L, dModel);
    for (let i = 0; i < L; i++) {
      const eRow = tokens[i] * dModel;
      const pRow = i * dModel;
      for (let j = 0; j < dModel; j++) {
        x.data[i * dModel + j] = this.embed.data[eRow + j] + this.pos.data[pRow + j];
      }
    }

    const layerTapes: LayerTape[] = [];
    let current = x;
    for (let li = 0; li < this.layers.length; li++) {
      const lw = this.layers[li];
      const attnInput = current;
      const normed = rmsNormForward(attnInput);
      const q = this.linearForward(normed, lw.wq, `layer${li}.wq`);
      const k = this.linearForward(normed, lw.wk, `layer${li}.wk`);
      const v = this.linearForward(normed, lw.wv, `layer${li}.wv`);

      const context = zeros(L, dModel);
      const probs: Matrix[] = [];
      const invSqrt = 1 / Math.sqrt(dHead);
      for (let h = 0; h < nHeads; h++) {
        const off = h * dHead;
        const p = zeros(L, L);
        for (let i = 0; i < L; i++) {
          let max = -Infinity;
          for (let j = 0; j <= i; j++) {
            let s = 0;
            for (let t = 0; t < dHead; t++) {
              s += q.data[i * dModel + off + t] * k.data[j * dModel + off + t];
            }
            s *= invSqrt;
            p.data[i * L + j] = s;
            if (s > max) max = s;
          }
          let sum = 0;
          for (let j = 0; j <= i; j++) {
            const e = Math.exp(p.data[i * L + j] - max);
            p.data[i * L + j] = e;
            sum += e;
          }
          for (let j = 0; j <= i; j++) {
            p.data[i * L + j] /= sum;
            const w = p.data[i * L + j];
            if (w === 0) continue;
            for (let t = 0; t < dHead; t++) {
              context.data[i * dModel + off + t] += w * v.data[j * dModel + off + t];
            }
          }
        }
        probs.push(p);
      }

      const attnOut = this.linearForward(context, lw.wo, `layer${li}.wo`);
      const afterAttn = zeros(L, dModel);
      for (let i = 0; i < afterAttn.data.length; i++) {
        afterAttn.data[i] = attnInput.data[i] + attnOut.data[i];
      }

      const mlpNormed = rmsNormForward(afterAttn);
      const hidden = this.linearForward(mlpNormed, lw.w1, `layer${li}.w1`);
      for (let i = 0; i < hidden.data.length; i++) {
        if (hidden.data[i] < 0) hidden.data[i] = 0;
      }
      const mlpOut = this.linearForward(hidden, lw.w2, `layer${li}.w2`);
      const afterMlp = zeros(L, dModel);
      for (let i = 0; i < afterMlp.data.length; i++) {
        afterMlp.data[i] = afterAttn.data[i] + mlpOut.data[i];
      }

      layerTapes.push({
        attnInput, attnNormed: normed, q, k, v, probs, context,
        mlpInput: afterAttn, mlpNormed, hidden,
      });
      current = afterMlp;
    }

    const normed = rmsNormForward(current);
    const logits = matmulTransposeB(normed, this.embed);
    return { tokens, embedded: x, layers: layerTapes, final: current, normed, logits };
  }

  /** Mean token-level cross entropy over positions where mask is true. */
  loss(tokens: number[], lossMask: boolean[]): number {
    const tape = this.forward(tokens);
    return this.lossFromTape(tape, lossMask).loss;
  }

  private lossFromTape(tape: Tape, lossMask: boolean[]) {
    const { vocab } = this.cfg;
    const L = tape.tokens.length;
    const logRow = new Float32Array(vocab);
    let total = 0;
    let count = 0;
    const perPosition: Array<{ i: number; target: number }> = [];
    for (let i = 0; i < L - 1; i++) {
      if (!lossMask[i]) continue;
      logSoftmaxRow(tape.logits.data, i * vocab, vocab, logRow);
      total -= logRow[tape.tokens[i + 1]];
      count += 1;
      perPosition.push({ i, target: tape.tokens[i + 1] });
    }
    return { loss: count ? total / count : 0, count, perPosition };
  }

  /**
   * Forward, cross entropy, and full backward; adapter gradients land in
   * the grad store installed via setGradStore. Returns the mean loss.
   */
  trainStep(tokens: number[], lossMask: boolean[]): number {
    const tape = this.forward(tokens);
    const { loss, count, perPosition } = this.lossFromTape(tape, lossMask);
    if (count === 0) return 0;

    const { vocab, dModel, nHeads } = this.cfg;
    const L = tape.tokens.length;
    const dHead = dModel / nHeads;

    // d(loss)/d(logits): softmax minus one-hot at masked rows
    const dLogits = zeros(L, vocab);
    const logRow = new Float32Array(vocab);
    for (const { i, target } of perPosition) {
      logSoftmaxRow(tape.logits.data, i * vocab, vocab, logRow);
      const row = i * vocab;
      for (let j = 0; j < vocab; j++) dLogits.data[row + j] = Math.exp(logRow[j]) / count;
      dLogits.data[row + target] -= 1 / count;
    }

    // logits = normed x embed^T (embedding frozen, no grad for it)
    const dNormed = matmul(dLogits, this.embed);
    let dX = rmsNormBackward(dNormed, tape.final);

    for (let li = this.layers.length - 1; li >= 0; li--) {
      const lw = this.layers[li];
      const t = tape.layers[li];
      const Lrows = dX.rows;

      // mlp block
      const dHidden = this.linearBackward(dX, { input: t.hidden }, lw.w2, `layer${li}.w2`);
      for (let i = 0; i < dHidden.data.length; i++) {
        if (t.hidden.data[i] === 0) dHidden.data[i] = 0;
      }
      const dMlpNormed = this.linearBackward(dHidden, { input: t.mlpNormed }, lw.w1, `layer${li}.w1`);
      const dAfterAttn = rmsNormBackward(dMlpNormed, t.mlpInput);
      addInPlace(dAfterAttn, dX); // residual

      // attention block
      const dAttnOut = dAfterAttn;
      const dContext = this.linearBackward(dAttnOut, { input: t.context }, lw.wo, `layer${li}.wo`);
      const dQ = zeros(Lrows, dModel);
      const dK = zeros(Lrows, dModel);
      const dV = zeros(Lrows, dModel);
      const invSqrt = 1 / Math.sqrt(dHead);
      for (let h = 0; h < nHeads; h++) {
        const off = h * dHead;
        const p = tape.layers[li].probs[h];
        for (let i = 0; i < Lrows; i++) {
          // dP and the softmax jacobian, row by row
          let dot = 0;
          const dpRow = new Float32Array(i + 1);
          for (let j = 0; j <= i; j++) {
            let s = 0;
            for (let tIdx = 0; tIdx < dHead; tIdx++) {
              s += dContext.data[i * dModel + off + tIdx] * t.v.data[j * dModel + off + tIdx];
            }
            dpRow[j] = s;
            dot += s * p.data[i * L + j];
          }
          for (let j = 0; j <= i; j++) {
            const w = p.data[i * L + j];
            if (w === 0) continue;
            const dS = w * (dpRow[j] - dot) * invSqrt;
            for (let tIdx = 0; tIdx < dHead; tIdx++) {
              dQ.data[i * dModel + off + tIdx] += dS * t.k.data[j * dModel + off + tIdx];
              dK.data[j * dModel + off + tIdx] += dS * t.q.data[i * dModel + off + tIdx];
              dV.data[j * dModel + off + tIdx] += w * dContext.data[i * dModel + off + tIdx];
            }
          }
        }
      }

      const dNorm1 = this.linearBackward(dQ, { input: t.attnNormed }, lw.wq, `layer${li}.wq`);
      addInPlace(dNorm1, this.linearBackward(dK, { input: t.attnNormed }, lw.wk, `layer${li}.wk`));
      addInPlace(dNorm1, this.linearBackward(dV, { input: t.attnNormed }, lw.wv, `layer${li}.wv`));
      const dAttnInput = rmsNormBackward(dNorm1, t.attnInput);
      addInPlace(dAttnInput, dAfterAttn); // residual
      dX = dAttnInput;
    }
    return loss;
  }

  /** Log-probability of each continuation token given everything before it. */
  continuationLogProb(context: number[], continuation: number[]): number {
    const tokens = [...context, ...continuation];
    if (tokens.length > this.cfg.maxSeq) {
      const overflow = tokens.length - this.cfg.maxSeq;
      return this.continuationLogProb(context.slice(overflow), continuation);
    }
    const tape = this.forward(tokens);
    const { vocab } = this.cfg;
    const logRow = new Float32Array(vocab);
    let total = 0;
    for (let k = 0; k < continuation.length; k++) {
      const pos = context.length + k - 1;
      logSoftmaxRow(tape.logits.data, pos * vocab, vocab, logRow);
      total += logRow[continuation[k]];
    }
    return total;
  }

  save(dir: string): void {
    fs.mkdirSync(dir, { recursive: true });
    const manifest = { id: this.id, config: this.cfg, params: this.paramCount() };
    fs.writeFileSync(path.join(dir, 'manifest.json'), JSON.stringify(manifest, null, 1) + '\n');
    const weights: Record<string, number[]> = {
      embed: Array.from(this.embed.data),
      pos: Array.from(this.pos.data),
    };
    this.layers.forEach((l, i) => {
      weights[`layer${i}.wq`] = Array.from(l.wq.data);
      weights[`layer${i}.wk`] = Array.from(l.wk.data);
      weights[`layer${i}.wv`] = Array.from(l.wv.data);
      weights[`layer${i}.wo`] = Array.from(l.wo.data);
      weights[`layer${i}.w1`] = Array.from(l.w1.data);
      weights[`layer${i}.w2`] = Array.from(l.w2.data);
    });
    fs.writeFileSync(path.join(dir, 'weights.json'), JSON.stringify(weights) + '\n');
  }
}

/** Deterministic builder; same seed, same weights, same id. */
export function createModel(seed: number, cfg: ModelConfig = TOY_CONFIG): Model {
  return new Model(cfg, seed);
}
