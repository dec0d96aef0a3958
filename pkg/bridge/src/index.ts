export { Matrix, matmul, matmulTransposeA, matmulTransposeB, maxAbsDiff, rng, zeros } from './tensor.js';
export { BOS, EOS, VOCAB_SIZE, buildExample, decode, encode } from './tokenizer.js';
export { DEFAULT_RANK, LoraAdapter, LoraPair, adapterDigest, initAdapter, loadAdapter, saveAdapter } from './lora.js';
export { Model, ModelConfig, TOY_CONFIG, createModel, makeGradStore, targetModules } from './model.js';
export { AugmentedRecord, SchemaPair, readAugmentedRecords, readSchemaCorpus } from './data.js';
export { DEFAULT_TRAIN, TrainConfig, TrainResult, trainPIAdapter, trainSchemaAdapter } from './trainer.js';
export { END_CANDIDATE, goldProgramLogProb, scoreCandidates } from './scoring.js';
export { createScorerServer, startScorerServer } from './server.js';
