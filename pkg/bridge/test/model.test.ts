import assert from 'node:assert/strict';
import { test } from 'node:test';

import { initAdapter } from '../src/lora.js';
import { createModel, makeGradStore, targetModules } from '../src/model.js';
import { BOS, EOS, buildExample, encode } from '../src/tokenizer.js';

test('same seed builds the same model, different seed does not', () => {
  const a = createModel(99);
  const b = createModel(99);
  const c = createModel(100);
  assert.equal(a.weightDigest(), b.weightDigest());
  assert.notEqual(a.weightDigest(), c.weightDigest());
  assert.equal(a.id, b.id);
});

test('continuation log-probs are finite, negative, and deterministic', () => {
  const model = createModel(7);
  const context = [BOS, ...encode('hello\n')];
  const continuation = encode('world');
  const p1 = model.continuationLogProb(context, continuation);
  const p2 = model.continuationLogProb(context, continuation);
  assert.equal(p1, p2);
  assert.ok(Number.isFinite(p1));
  assert.ok(p1 < 0);
});

test('long contexts are truncated from the left instead of failing', () => {
  const model = createModel(7);
  const context = [BOS, ...encode('x'.repeat(500))];
  const value = model.continuationLogProb(context, [EOS]);
  assert.ok(Number.isFinite(value));
});

test('adapter gradients match finite differences', () => {
  const model = createModel(42);
  const adapter = initAdapter('g', model.id, targetModules(model.cfg), 4, 9);
  for (const [, pair] of adapter.modules) {
    for (let i = 0; i < pair.b.data.length; i++) pair.b.data[i] = Math.sin(i * 0.7) * 0.05;
  }
  const { tokens, lossMask } = buildExample('Beatles || instance of\n', 'band', 192);
  const grads = makeGradStore(adapter);
  model.plug([adapter], 'g');
  model.setGradStore(grads);
  model.trainStep(tokens, lossMask);
  model.setGradStore(null);

  const eps = 1e-2;
  let comparable = 0;
  for (const module of ['layer0.wq', 'layer0.wk', 'layer0.wv', 'layer0.w1', 'layer1.wo', 'layer1.w2']) {
    const pair = adapter.modules.get(module)!;
    const g = grads.get(module)!;
    for (const side of ['a', 'b'] as const) {
      for (const idx of [0, 7, 23]) {
        const original = pair[side].data[idx];
        pair[side].data[idx] = original + eps;
        const up = model.loss(tokens, lossMask);
        pair[side].data[idx] = original - eps;
        const down = model.loss(tokens, lossMask);
        pair[side].data[idx] = original;
        const numeric = (up - down) / (2 * eps);
        const analytic = g[side].data[idx];
        const magnitude = Math.abs(numeric) + Math.abs(analytic);
        if (magnitude < 1e-4) continue; // below float32 finite-difference noise
        comparable += 1;
        const rel = Math.abs(numeric - analytic) / magnitude;
        assert.ok(rel < 0.05, `${module}.${side}[${idx}]: numeric ${numeric}, analytic ${analytic}`);
      }
    }
  }
  assert.ok(comparable >= 20, `only ${comparable} coordinates were above the noise floor`);
  model.unplug();
});

test('training steps reduce the loss on a small corpus', () => {
  const model = createModel(11);
  const adapter = initAdapter('t', model.id, targetModules(model.cfg), 8, 3);
  const grads = makeGradStore(adapter);
  const { tokens, lossMask } = buildExample('color of sky\n', 'blue', 192);
  model.plug([adapter], 't');
  model.setGradStore(grads);
  const first = model.trainStep(tokens, lossMask);
  // crude SGD against the accumulated gradient
  for (let step = 0; step < 25; step++) {
    for (const [name, pair] of adapter.modules) {
      const g = grads.get(name)!;
      for (let i = 0; i < pair.a.data.length; i++) pair.a.data[i] -= 0.1 * g.a.data[i];
      for (let i = 0; i < pair.b.data.length; i++) pair.b.data[i] -= 0.1 * g.b.data[i];
      g.a.data.fill(0);
      g.b.data.fill(0);
    }
    model.trainStep(tokens, lossMask);
  }
  model.setGradStore(null);
  const last = model.loss(tokens, lossMask);
  model.unplug();
  assert.ok(last < first, `loss did not drop: ${first} -> ${last}`);
});
