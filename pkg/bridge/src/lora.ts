/**
 * Low-rank adapters: per-target-matrix factor pairs (A, B) whose product
 * is added to the frozen base weight while the adapter is plugged.
 *
 * The base weights are never mutated; plugging is a view, so unplugging
 * restores base behavior bit-identically by construction.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { createHash } from 'node:crypto';

import { Matrix, fromArray, randomMatrix, rng, zeros } from './tensor.js';

export interface LoraPair {
  /** (dOut, rank) factor. */
  a: Matrix;
  /** (rank, dIn) factor. */
  b: Matrix;
}

export interface LoraAdapter {
  name: string;
  rank: number;
  baseModelId: string;
  /** target module name -> factor pair */
  modules: Map<string, LoraPair>;
}

export const DEFAULT_RANK = 16;

export function initAdapter(
  name: string,
  baseModelId: string,
  targets: Array<{ module: string; dOut: number; dIn: number }>,
  rank: number,
  seed: number,
): LoraAdapter {
  const next = rng(seed);
  const modules = new Map<string, LoraPair>();
  for (const t of targets) {
    // B starts at zero so an untrained adapter is an exact no-op
    modules.set(t.module, {
      a: randomMatrix(t.dOut, rank, 0.02, next),
      b: zeros(rank, t.dIn),
    });
  }
  return { name, rank, baseModelId, modules };
}

export function adapterDigest(adapter: LoraAdapter): string {
  const hash = createHash('sha256');
  for (const key of [...adapter.modules.keys()].sort()) {
    const pair = adapter.modules.get(key)!;
    hash.update(key);
    hash.update(Buffer.from(pair.a.data.buffer, pair.a.data.byteOffset, pair.a.data.byteLength));
    hash.update(Buffer.from(pair.b.data.buffer, pair.b.data.byteOffset, pair.b.data.byteLength));
  }
  return hash.digest('hex').slice(0, 16);
}

interface AdapterManifest {
  name: string;
  rank: number;
  base_model_id: string;
  target_modules: string[];
  training_digest: string;
}

export function saveAdapter(adapter: LoraAdapter, dir: string): void {
  fs.mkdirSync(dir, { recursive: true });
  const manifest: AdapterManifest = {
    name: adapter.name,
    rank: adapter.rank,
    base_model_id: adapter.baseModelId,
    target_modules: [...adapter.modules.keys()].sort(),
    training_digest: adapterDigest(adapter),
  };
  fs.writeFileSync(path.join(dir, 'manifest.json'), JSON.stringify(manifest, null, 1) + '\n');
  const weights: Record<string, { a: number[]; a_shape: number[]; b: number[]; b_shape: number[] }> = {};
  for (const key of [...adapter.modules.keys()].sort()) {
    const { a, b } = adapter.modules.get(key)!;
    weights[key] = {
      a: Array.from(a.data),
      a_shape: [a.rows, a.cols],
      b: Array.from(b.data),
      b_shape: [b.rows, b.cols],
    };
  }
  fs.writeFileSync(path.join(dir, 'weights.json'), JSON.stringify(weights) + '\n');
}

export function loadAdapter(dir: string): LoraAdapter {
  const manifest: AdapterManifest = JSON.parse(
    fs.readFileSync(path.join(dir, 'manifest.json'), 'utf-8'),
  );
  const weights = JSON.parse(fs.readFileSync(path.join(dir, 'weights.json'), 'utf-8'));
  const modules = new Map<string, LoraPair>();
  for (const key of manifest.target_modules) {
    const w = weights[key];
    if (!w) throw new Error(`adapter ${manifest.name}: missing weights for ${key}`);
    modules.set(key, {
      a: fromArray(w.a_shape[0], w.a_shape[1], w.a),
      b: fromArray(w.b_shape[0], w.b_shape[1], w.b),
    });
  }
  const adapter: LoraAdapter = {
    name: manifest.name,
    rank: manifest.rank,
    baseModelId: manifest.base_model_id,
    modules,
  };
  const digest = adapterDigest(adapter);
  if (digest !== manifest.training_digest) {
    throw new Error(`adapter ${manifest.name}: weight digest mismatch (${digest})`);
  }
  return adapter;
}
