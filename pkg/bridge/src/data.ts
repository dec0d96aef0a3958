/**
 * Readers for the engine's training-data file formats (JSON lines).
 */

import * as fs from 'node:fs';

export interface SchemaPair {
  query: string;
  answer: string;
}

export interface AugmentedRecord {
  question: string;
  programs: string[];
}

function lines(path: string): string[] {
  return fs
    .readFileSync(path, 'utf-8')
    .split('\n')
    .filter((line) => line.trim().length > 0);
}

export function readSchemaCorpus(path: string): SchemaPair[] {
  return lines(path).map((line, idx) => {
    const rec = JSON.parse(line);
    if (typeof rec.query !== 'string' || typeof rec.answer !== 'string') {
      throw new Error(`${path}:${idx + 1}: schema corpus line needs query and answer`);
    }
    return { query: rec.query, answer: rec.answer };
  });
}

export function readAugmentedRecords(path: string): AugmentedRecord[] {
  return lines(path).map((line, idx) => {
    const rec = JSON.parse(line);
    if (typeof rec.question !== 'string' || !Array.isArray(rec.programs)) {
      throw new Error(`${path}:${idx + 1}: augmented record needs question and programs`);
    }
    return { question: rec.question, programs: rec.programs.map(String) };
  });
}
