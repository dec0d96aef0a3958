/**
 * Adapter training: Adam over the low-rank factors of exactly one
 * adapter, with the base model and any other plugged adapters frozen.
 *
 * Sequence rendering matches the scorer byte for byte: the model sees
 * BOS + "<context>\n" + "<target>" + EOS and the loss covers the target
 * plus EOS.
 */

import { AugmentedRecord, SchemaPair } from './data.js';
import { LoraAdapter } from './lora.js';
import { GradStore, Model, makeGradStore } from './model.js';
import { Matrix, rng, zeros } from './tensor.js';
import { buildExample } from './tokenizer.js';

export interface TrainConfig {
  epochs: number;
  batchSize: number;
  learningRate: number;
  seed: number;
}

export const DEFAULT_TRAIN: TrainConfig = {
  epochs: 3,
  batchSize: 8,
  learningRate: 0.01,
  seed: 7,
};

export interface TrainLogEntry {
  epoch: number;
  meanLoss: number;
}

export interface TrainResult {
  initialLoss: number;
  finalLoss: number;
  steps: number;
  log: TrainLogEntry[];
}

interface Example {
  context: string;
  target: string;
  /** adapters plugged while this example is trained (trainable last) */
  plugged: LoraAdapter[];
}

class Adam {
  private m: Map<string, { a: Matrix; b: Matrix }> = new Map();
  private v: Map<string, { a: Matrix; b: Matrix }> = new Map();
  private t = 0;

  constructor(
    private readonly adapter: LoraAdapter,
    private readonly lr: number,
    private readonly beta1 = 0.9,
    private readonly beta2 = 0.999,
    private readonly eps = 1e-8,
  ) {
    for (const [name, pair] of adapter.modules) {
      this.m.set(name, { a: zeros(pair.a.rows, pair.a.cols), b: zeros(pair.b.rows, pair.b.cols) });
      this.v.set(name, { a: zeros(pair.a.rows, pair.a.cols), b: zeros(pair.b.rows, pair.b.cols) });
    }
  }

  step(grads: GradStore): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (const [name, pair] of this.adapter.modules) {
      const g = grads.get(name)!;
      const m = this.m.get(name)!;
      const v = this.v.get(name)!;
      for (const side of ['a', 'b'] as const) {
        const weights = pair[side].data;
        const grad = g[side].data;
        const mData = m[side].data;
        const vData = v[side].data;
        for (let i = 0; i < weights.length; i++) {
          mData[i] = this.beta1 * mData[i] + (1 - this.beta1) * grad[i];
          vData[i] = this.beta2 * vData[i] + (1 - this.beta2) * grad[i] * grad[i];
          weights[i] -= (this.lr * (mData[i] / c1)) / (Math.sqrt(vData[i] / c2) + this.eps);
        }
      }
    }
  }
}

function zeroGrads(grads: GradStore): void {
  for (const pair of grads.values()) {
    pair.a.data.fill(0);
    pair.b.data.fill(0);
  }
}

function scaleGrads(grads: GradStore, factor: number): void {
  for (const pair of grads.values()) {
    for (let i = 0; i < pair.a.data.length; i++) pair.a.data[i] *= factor;
    for (let i = 0; i < pair.b.data.length; i++) pair.b.data[i] *= factor;
  }
}

function meanLoss(model: Model, adapter: LoraAdapter, examples: Example[], maxSeq: number): number {
  let total = 0;
  for (const ex of examples) {
    model.plug(ex.plugged);
    const { tokens, lossMask } = buildExample(`${ex.context}\n`, ex.target, maxSeq);
    total += model.loss(tokens, lossMask);
  }
  model.unplug();
  return total / Math.max(examples.length, 1);
}

function runTraining(
  model: Model,
  adapter: LoraAdapter,
  examples: Example[],
  cfg: TrainConfig,
): TrainResult {
  if (examples.length === 0) throw new Error('no training examples');
  const maxSeq = model.cfg.maxSeq;
  const initialLoss = meanLoss(model, adapter, examples, maxSeq);
  const adam = new Adam(adapter, cfg.learningRate);
  const grads = makeGradStore(adapter);
  const next = rng(cfg.seed);
  const log: TrainLogEntry[] = [];
  let steps = 0;

  const order = examples.map((_, i) => i);
  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    // Fisher-Yates with the seeded stream
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(next() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let epochLoss = 0;
    let inBatch = 0;
    zeroGrads(grads);
    for (let n = 0; n < order.length; n++) {
      const ex = examples[order[n]];
      model.plug(ex.plugged, adapter.name);
      model.setGradStore(grads);
      const { tokens, lossMask } = buildExample(`${ex.context}\n`, ex.target, maxSeq);
      epochLoss += model.trainStep(tokens, lossMask);
      if (!Number.isFinite(epochLoss)) {
        throw new Error(`training diverged (loss is not finite) at epoch ${epoch}`);
      }
      inBatch += 1;
      if (inBatch === cfg.batchSize || n === order.length - 1) {
        scaleGrads(grads, 1 / inBatch);
        adam.step(grads);
        zeroGrads(grads);
        inBatch = 0;
        steps += 1;
      }
    }
    model.setGradStore(null);
    model.unplug();
    log.push({ epoch, meanLoss: epochLoss / order.length });
  }

  const finalLoss = meanLoss(model, adapter, examples, maxSeq);
  return { initialLoss, finalLoss, steps, log };
}

/** Triple-completion training: the schema adapter is the only plug. */
export function trainSchemaAdapter(
  model: Model,
  adapter: LoraAdapter,
  corpus: SchemaPair[],
  cfg: TrainConfig = DEFAULT_TRAIN,
): TrainResult {
  const examples = corpus.map((pair) => ({
    context: pair.query,
    target: pair.answer,
    plugged: [adapter],
  }));
  return runTraining(model, adapter, examples, cfg);
}

/**
 * Program-induction training: for every (question, program_i) the frozen
 * schema adapter i is plugged together with the trainable PI adapter, so
 * the PI adapter must read KB-specific naming out of whichever schema
 * adapter is active.
 */
export function trainPIAdapter(
  model: Model,
  piAdapter: LoraAdapter,
  schemaAdapters: LoraAdapter[],
  records: AugmentedRecord[],
  cfg: TrainConfig = DEFAULT_TRAIN,
): TrainResult {
  const width = schemaAdapters.length;
  const examples: Example[] = [];
  for (const record of records) {
    if (record.programs.length !== width) {
      throw new Error(
        `record ${JSON.stringify(record.question)} carries ${record.programs.length} programs ` +
        `but ${width} schema adapters are loaded`,
      );
    }
    record.programs.forEach((program, i) => {
      examples.push({
        context: record.question,
        target: program,
        plugged: [schemaAdapters[i], piAdapter],
      });
    });
  }
  return runTraining(model, piAdapter, examples, cfg);
}
