/**
 * Minimal dense float32 linear algebra for the bridge model.
 *
 * Matrices are flat row-major Float32Arrays. Everything is written for
 * predictable allocation and a hot i-k-j matmul loop; no external math
 * dependency so results are reproducible anywhere Node runs.
 */

export interface Matrix {
  rows: number;
  cols: number;
  data: Float32Array;
}

export function zeros(rows: number, cols: number): Matrix {
  return { rows, cols, data: new Float32Array(rows * cols) };
}

export function fromArray(rows: number, cols: number, values: number[]): Matrix {
  if (values.length !== rows * cols) throw new Error('shape mismatch');
  return { rows, cols, data: Float32Array.from(values) };
}

export function clone(m: Matrix): Matrix {
  return { rows: m.rows, cols: m.cols, data: m.data.slice() };
}

/** Deterministic PRNG (mulberry32); the only randomness source allowed. */
export function rng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Approximate normal draw from averaged uniforms; plenty for init. */
export function randn(next: () => number): number {
  let sum = 0;
  for (let i = 0; i < 6; i++) sum += next();
  return (sum - 3) / Math.sqrt(0.5);
}

export function randomMatrix(rows: number, cols: number, scale: number, next: () => number): Matrix {
  const m = zeros(rows, cols);
  for (let i = 0; i < m.data.length; i++) m.data[i] = randn(next) * scale;
  return m;
}

/** C = A x B, (m,k) x (k,n) -> (m,n). */
export function matmul(a: Matrix, b: Matrix, out?: Matrix): Matrix {
  if (a.cols !== b.rows) throw new Error(`matmul shapes (${a.rows},${a.cols})x(${b.rows},${b.cols})`);
  const c = out ?? zeros(a.rows, b.cols);
  c.data.fill(0);
  const { rows: m, cols: k } = a;
  const n = b.cols;
  for (let i = 0; i < m; i++) {
    const aRow = i * k;
    const cRow = i * n;
    for (let p = 0; p < k; p++) {
      const av = a.data[aRow + p];
      if (av === 0) continue;
      const bRow = p * n;
      for (let j = 0; j < n; j++) {
        c.data[cRow + j] += av * b.data[bRow + j];
      }
    }
  }
  return c;
}

/** C = A x B^T, (m,k) x (n,k)^T -> (m,n). */
export function matmulTransposeB(a: Matrix, b: Matrix, out?: Matrix): Matrix {
  if (a.cols !== b.cols) throw new Error(`matmulTB shapes (${a.rows},${a.cols})x(${b.rows},${b.cols})T`);
  const c = out ?? zeros(a.rows, b.rows);
  const { rows: m, cols: k } = a;
  const n = b.rows;
  for (let i = 0; i < m; i++) {
    const aRow = i * k;
    const cRow = i * n;
    for (let j = 0; j < n; j++) {
      const bRow = j * k;
      let sum = 0;
      for (let p = 0; p < k; p++) sum += a.data[aRow + p] * b.data[bRow + p];
      c.data[cRow + j] = sum;
    }
  }
  return c;
}

/** C = A^T x B, (m,k)^T x (m,n) -> (k,n). */
export function matmulTransposeA(a: Matrix, b: Matrix, out?: Matrix): Matrix {
  if (a.rows !== b.rows) throw new Error(`matmulTA shapes (${a.rows},${a.cols})Tx(${b.rows},${b.cols})`);
  const c = out ?? zeros(a.cols, b.cols);
  c.data.fill(0);
  const m = a.rows;
  const k = a.cols;
  const n = b.cols;
  for (let i = 0; i < m; i++) {
    const aRow = i * k;
    const bRow = i * n;
    for (let p = 0; p < k; p++) {
      const av = a.data[aRow + p];
      if (av === 0) continue;
      const cRow = p * n;
      for (let j = 0; j < n; j++) {
        c.data[cRow + j] += av * b.data[bRow + j];
      }
    }
  }
  return c;
}

export function addInPlace(target: Matrix, source: Matrix, scale = 1): void {
  if (target.data.length !== source.data.length) throw new Error('add shape mismatch');
  for (let i = 0; i < target.data.length; i++) target.data[i] += source.data[i] * scale;
}

export function maxAbsDiff(a: Matrix, b: Matrix): number {
  let worst = 0;
  for (let i = 0; i < a.data.length; i++) {
    const d = Math.abs(a.data[i] - b.data[i]);
    if (d > worst) worst = d;
  }
  return worst;
}

/** Numerically stable log-softmax over one row slice. */
export function logSoftmaxRow(data: Float32Array, offset: number, width: number, out: Float32Array): void {
  let max = -Infinity;
  for (let j = 0; j < width; j++) max = Math.max(max, data[offset + j]);
  let sum = 0;
  for (let j = 0; j < width; j++) sum += Math.exp(data[offset + j] - max);
  const logZ = max + Math.log(sum);
  for (let j = 0; j < width; j++) out[j] = data[offset + j] - logZ;
}
