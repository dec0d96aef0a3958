#!/usr/bin/env node
/**
 * Bridge CLI: train adapters on engine-generated corpora and serve the
 * scorer protocol.
 *
 *   kbplugin-bridge train-schema --corpus corpus.jsonl --out adapters/kb1 --name kb1
 *   kbplugin-bridge train-pi --data augmented.jsonl --schema-adapters adapters/kb1,adapters/kb2 \
 *       --out adapters/pi --name pi
 *   kbplugin-bridge serve --schema-adapter adapters/kb1 --pi-adapter adapters/pi --port 9000
 *
 * The base model is derived deterministically from --base-seed; adapters
 * remember which base they were trained for and refuse to plug elsewhere.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { readAugmentedRecords, readSchemaCorpus } from './data.js';
import { DEFAULT_RANK, initAdapter, loadAdapter, saveAdapter } from './lora.js';
import { createModel, targetModules } from './model.js';
import { startScorerServer } from './server.js';
import { DEFAULT_TRAIN, TrainResult, trainPIAdapter, trainSchemaAdapter } from './trainer.js';

interface Flags {
  [key: string]: string;
}

function parseFlags(argv: string[]): Flags {
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`expected --flag value pairs, got ${argv.slice(i).join(' ')}`);
    }
    flags[key.slice(2)] = argv[i + 1];
  }
  return flags;
}

function need(flags: Flags, name: string): string {
  const value = flags[name];
  if (value === undefined) throw new Error(`missing required flag --${name}`);
  return value;
}

function trainConfig(flags: Flags) {
  return {
    epochs: Number(flags.epochs ?? DEFAULT_TRAIN.epochs),
    batchSize: Number(flags['batch-size'] ?? DEFAULT_TRAIN.batchSize),
    learningRate: Number(flags.lr ?? DEFAULT_TRAIN.learningRate),
    seed: Number(flags.seed ?? DEFAULT_TRAIN.seed),
  };
}

function writeTrainingLog(dir: string, summary: Record<string, unknown>, result: TrainResult): void {
  fs.writeFileSync(
    path.join(dir, 'training.json'),
    JSON.stringify({ ...summary, ...result }, null, 1) + '\n',
  );
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  if (!command) {
    console.error('usage: kbplugin-bridge <train-schema|train-pi|serve> --flags');
    return 2;
  }
  const flags = parseFlags(rest);
  const baseSeed = Number(flags['base-seed'] ?? 1234);
  const model = createModel(baseSeed);

  if (command === 'train-schema') {
    const corpus = readSchemaCorpus(need(flags, 'corpus'));
    const adapter = initAdapter(
      need(flags, 'name'),
      model.id,
      targetModules(model.cfg),
      Number(flags.rank ?? DEFAULT_RANK),
      Number(flags['adapter-seed'] ?? 11),
    );
    const cfg = trainConfig(flags);
    const result = trainSchemaAdapter(model, adapter, corpus, cfg);
    const out = need(flags, 'out');
    saveAdapter(adapter, out);
    writeTrainingLog(out, { adapter: adapter.name, kind: 'schema', pairs: corpus.length, ...cfg }, result);
    console.log(JSON.stringify({ adapter: adapter.name, pairs: corpus.length, ...result }, null, 1));
    return 0;
  }

  if (command === 'train-pi') {
    const records = readAugmentedRecords(need(flags, 'data'));
    const schemaAdapters = need(flags, 'schema-adapters').split(',').map((d) => loadAdapter(d.trim()));
    const adapter = initAdapter(
      need(flags, 'name'),
      model.id,
      targetModules(model.cfg),
      Number(flags.rank ?? DEFAULT_RANK),
      Number(flags['adapter-seed'] ?? 13),
    );
    const cfg = trainConfig(flags);
    const result = trainPIAdapter(model, adapter, schemaAdapters, records, cfg);
    const out = need(flags, 'out');
    saveAdapter(adapter, out);
    writeTrainingLog(
      out,
      { adapter: adapter.name, kind: 'pi', records: records.length,
        schema_adapters: schemaAdapters.map((a) => a.name), ...cfg },
      result,
    );
    console.log(JSON.stringify({ adapter: adapter.name, records: records.length, ...result }, null, 1));
    return 0;
  }

  if (command === 'serve') {
    const adapters = [];
    if (flags['schema-adapter']) adapters.push(loadAdapter(flags['schema-adapter']));
    if (flags['pi-adapter']) adapters.push(loadAdapter(flags['pi-adapter']));
    const service = await startScorerServer(model, adapters, Number(flags.port ?? 9000));
    console.error(
      `scorer listening on :${service.port} base=${model.id} adapters=[${model.activeAdapterNames()}]`,
    );
    await new Promise(() => undefined); // run until killed
    return 0;
  }

  console.error(`unknown command ${command}`);
  return 2;
}

main().then(
  (code) => {
    if (code !== 0) process.exitCode = code;
  },
  (err) => {
    console.error(String(err instanceof Error ? err.message : err));
    process.exitCode = 1;
  },
);
