/**
 * Minimal reverse-mode autodiff over dense 2D Float64 tensors.
 *
 * Everything is a [rows, cols] matrix (row vectors are [1, d]). Each op
 * records its parents and a backward closure on the tape; backward() runs
 * the closures in reverse topological order. 64-bit throughout so analytic
 * gradients can be checked against central finite differences tightly.
 */

import { Rng } from "./rng";

export class Tensor {
  data: Float64Array;
  rows: number;
  cols: number;
  grad: Float64Array | null = null;
  requiresGrad: boolean;
  parents: Tensor[] = [];
  backwardFn: (() => void) | null = null;
  name = "";

  constructor(rows: number, cols: number, data?: Float64Array, requiresGrad = false) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (data && data.length !== rows * cols) {
      throw new Error(`data length ${data.length} != ${rows}x${cols}`);
    }
    this.requiresGrad = requiresGrad;
  }

  get size(): number {
    return this.rows * this.cols;
  }

  at(r: number, c: number): number {
    return this.data[r * this.cols + c];
  }

  set(r: number, c: number, v: number): void {
    this.data[r * this.cols + c] = v;
  }

  ensureGrad(): Float64Array {
    if (!this.grad) this.grad = new Float64Array(this.size);
    return this.grad;
  }

  zeroGrad(): void {
    if (this.grad) this.grad.fill(0);
  }

  clone(): Tensor {
    return new Tensor(this.rows, this.cols, this.data.slice(), this.requiresGrad);
  }

  /** scalar value of a [1,1] tensor */
  item(): number {
    if (this.size !== 1) throw new Error(`item() on ${this.rows}x${this.cols}`);
    return this.data[0];
  }
}

export function constant(rows: number, cols: number, data?: Float64Array): Tensor {
  return new Tensor(rows, cols, data, false);
}

export function parameter(rows: number, cols: number, rng: Rng, scale?: number): Tensor {
  const t = new Tensor(rows, cols, undefined, true);
  const s = scale ?? 1.0 / Math.sqrt(rows);
  for (let i = 0; i < t.size; i++) t.data[i] = rng.gaussian() * s;
  return t;
}

export function zerosParameter(rows: number, cols: number): Tensor {
  return new Tensor(rows, cols, undefined, true);
}

function track(out: Tensor, parents: Tensor[], backwardFn: () => void): Tensor {
  if (parents.some((p) => p.requiresGrad)) {
    out.requiresGrad = true;
    out.parents = parents;
    out.backwardFn = backwardFn;
  }
  return out;
}

function sameShape(a: Tensor, b: Tensor, op: string): void {
  if (a.rows !== b.rows || a.cols !== b.cols) {
    throw new Error(`${op}: shape ${a.rows}x${a.cols} vs ${b.rows}x${b.cols}`);
  }
}

export function add(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "add");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] + b.data[i];
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] += g[i];
    }
  });
}

export function sub(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "sub");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] - b.data[i];
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] -= g[i];
    }
  });
}

export function mul(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "mul");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] * b.data[i];
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i] * b.data[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] += g[i] * a.data[i];
    }
  });
}

export function scale(a: Tensor, k: number): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] * k;
  return track(out, [a], () => {
    const g = out.grad!;
    const ga = a.ensureGrad();
    for (let i = 0; i < g.length; i++) ga[i] += g[i] * k;
  });
}

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) {
    throw new Error(`matmul: ${a.rows}x${a.cols} by ${b.rows}x${b.cols}`);
  }
  const out = new Tensor(a.rows, b.cols);
  for (let i = 0; i < a.rows; i++) {
    for (let k = 0; k < a.cols; k++) {
      const av = a.data[i * a.cols + k];
      if (av === 0) continue;
      for (let j = 0; j < b.cols; j++) {
        out.data[i * b.cols + j] += av * b.data[k * b.cols + j];
      }
    }
  }
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < b.cols; j++) {
          const gv = g[i * b.cols + j];
          if (gv === 0) continue;
          for (let k = 0; k < a.cols; k++) {
            ga[i * a.cols + k] += gv * b.data[k * b.cols + j];
          }
        }
      }
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let k = 0; k < a.cols; k++) {
          const av = a.data[i * a.cols + k];
          if (av === 0) continue;
          for (let j = 0; j < b.cols; j++) {
            gb[k * b.cols + j] += av * g[i * b.cols + j];
          }
        }
      }
    }
  });
}

/** a [m,k] times transpose(b [n,k]) -> [m,n] */
export function matmulTransposeB(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.cols) {
    throw new Error(`matmulTransposeB: ${a.rows}x${a.cols} by ${b.rows}x${b.cols}`);
  }
  const out = new Tensor(a.rows, b.rows);
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < b.rows; j++) {
      let acc = 0;
      for (let k = 0; k < a.cols; k++) {
        acc += a.data[i * a.cols + k] * b.data[j * b.cols + k];
      }
      out.data[i * b.rows + j] = acc;
    }
  }
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < b.rows; j++) {
          const gv = g[i * b.rows + j];
          if (gv === 0) continue;
          for (let k = 0; k < a.cols; k++) {
            ga[i * a.cols + k] += gv * b.data[j * b.cols + k];
          }
        }
      }
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < b.rows; j++) {
          const gv = g[i * b.rows + j];
          if (gv === 0) continue;
          for (let k = 0; k < a.cols; k++) {
            gb[j * b.cols + k] += gv * a.data[i * a.cols + k];
          }
        }
      }
    }
  });
}

/** broadcast-add a [1,n] row vector onto every row of a [m,n] matrix */
export function addRowVector(a: Tensor, v: Tensor): Tensor {
  if (v.rows !== 1 || v.cols !== a.cols) {
    throw new Error(`addRowVector: ${a.rows}x${a.cols} + ${v.rows}x${v.cols}`);
  }
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < a.cols; j++) {
      out.data[i * a.cols + j] = a.data[i * a.cols + j] + v.data[j];
    }
  }
  return track(out, [a, v], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i];
    }
    if (v.requiresGrad) {
      const gv = v.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) gv[j] += g[i * a.cols + j];
      }
    }
  });
}

/** broadcast Hadamard: every row of a [m,n] times the [1,n] row vector */
export function mulRowVector(a: Tensor, v: Tensor): Tensor {
  if (v.rows !== 1 || v.cols !== a.cols) {
    throw new Error(`mulRowVector: ${a.rows}x${a.cols} * ${v.rows}x${v.cols}`);
  }
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < a.cols; j++) {
      out.data[i * a.cols + j] = a.data[i * a.cols + j] * v.data[j];
    }
  }
  return track(out, [a, v], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) {
          ga[i * a.cols + j] += g[i * a.cols + j] * v.data[j];
        }
      }
    }
    if (v.requiresGrad) {
      const gv = v.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) {
          gv[j] += g[i * a.cols + j] * a.data[i * a.cols + j];
        }
      }
    }
  });
}

function unary(
  a: Tensor,
  f: (x: number) => number,
  dfFromOut: (y: number, x: number) => number
): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = f(a.data[i]);
  return track(out, [a], () => {
    const g = out.grad!;
    const ga = a.ensureGrad();
    for (let i = 0; i < g.length; i++) {
      ga[i] += g[i] * dfFromOut(out.data[i], a.data[i]);
    }
  });
}

export function tanh(a: Tensor): Tensor {
  return unary(a, Math.tanh, (y) => 1 - y * y);
}

export function sigmoid(a: Tensor): Tensor {
  return unary(
    a,
    (x) => 1 / (1 + Math.exp(-x)),
    (y) => y * (1 - y)
  );
}

export function relu(a: Tensor): Tensor {
  return unary(
    a,
    (x) => (x > 0 ? x : 0),
    (_, x) => (x > 0 ? 1 : 0)
  );
}

export function logTensor(a: Tensor): Tensor {
  return unary(a, Math.log, (_, x) => 1 / x);
}

/** clamp with straight-through gradient inside the interval, zero outside */
export function clamp(a: Tensor, lo: number, hi: number): Tensor {
  return unary(
    a,
    (x) => Math.min(Math.max(x, lo), hi),
    (_, x) => (x >= lo && x <= hi ? 1 : 0)
  );
}

export function softmaxRows(a: Tensor): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.rows; i++) {
    let max = -Infinity;
    for (let j = 0; j < a.cols; j++) max = Math.max(max, a.at(i, j));
    let sum = 0;
    for (let j = 0; j < a.cols; j++) {
      const e = Math.exp(a.at(i, j) - max);
      out.data[i * a.cols + j] = e;
      sum += e;
    }
    for (let j = 0; j < a.cols; j++) out.data[i * a.cols + j] /= sum;
  }
  return track(out, [a], () => {
    const g = out.grad!;
    const ga = a.ensureGrad();
    for (let i = 0; i < a.rows; i++) {
      let dot = 0;
      for (let j = 0; j < a.cols; j++) {
        dot += g[i * a.cols + j] * out.data[i * a.cols + j];
      }
      for (let j = 0; j < a.cols; j++) {
        const y = out.data[i * a.cols + j];
        ga[i * a.cols + j] += (g[i * a.cols + j] - dot) * y;
      }
    }
  });
}

export function concatCols(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows) throw new Error("concatCols: row mismatch");
  const out = new Tensor(a.rows, a.cols + b.cols);
  for (let i = 0; i < a.rows; i++) {
    out.data.set(a.data.subarray(i * a.cols, (i + 1) * a.cols), i * out.cols);
    out.data.set(
      b.data.subarray(i * b.cols, (i + 1) * b.cols),
      i * out.cols + a.cols
    );
  }
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) ga[i * a.cols + j] += g[i * out.cols + j];
      }
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < b.cols; j++) {
          gb[i * b.cols + j] += g[i * out.cols + a.cols + j];
        }
      }
    }
  });
}

export function sliceCols(a: Tensor, start: number, width: number): Tensor {
  if (start < 0 || start + width > a.cols) throw new Error("sliceCols: out of range");
  const out = new Tensor(a.rows, width);
  for (let i = 0; i < a.rows; i++) {
    out.data.set(a.data.subarray(i * a.cols + start, i * a.cols + start + width), i * width);
  }
  return track(out, [a], () => {
    const g = out.grad!;
    const ga = a.ensureGrad();
    for (let i = 0; i < a.rows; i++) {
      for (let j = 0; j < width; j++) {
        ga[i * a.cols + start + j] += g[i * width + j];
      }
    }
  });
}

export function selectRow(a: Tensor, row: number): Tensor {
  if (row < 0 || row >= a.rows) throw new Error("selectRow: out of range");
  const out = new Tensor(1, a.cols);
  out.data.set(a.data.subarray(row * a.cols, (row + 1) * a.cols));
  return track(out, [a], () => {
    const g = out.grad!;
    const ga = a.ensureGrad();
    for (let j = 0; j < a.cols; j++) ga[row * a.cols + j] += g[j];
  });
}

export function stackRows(rows: Tensor[]): Tensor {
  if (rows.length === 0) throw new Error("stackRows: empty");
  const cols = rows[0].cols;
  for (const r of rows) {
    if (r.rows !== 1 || r.cols !== cols) throw new Error("stackRows: need [1,d] rows");
  }
  const out = new Tensor(rows.length, cols);
  rows.forEach((r, i) => out.data.set(r.data, i * cols));
  return track(out, rows.slice(), () => {
    const g = out.grad!;
    rows.forEach((r, i) => {
      if (!r.requiresGrad) return;
      const gr = r.ensureGrad();
      for (let j = 0; j < cols; j++) gr[j] += g[i * cols + j];
    });
  });
}

/** sum of selected entries: mask is 0/1 per element */
export function maskedSum(a: Tensor, mask: Float64Array): Tensor {
  if (mask.length !== a.size) throw new Error("maskedSum: mask size");
  const out = new Tensor(1, 1);
  let acc = 0;
  for (let i = 0; i < a.size; i++) acc += a.data[i] * mask[i];
  out.data[0] = acc;
  return track(out, [a], () => {
    const g = out.grad![0];
    const ga = a.ensureGrad();
    for (let i = 0; i < a.size; i++) ga[i] += g * mask[i];
  });
}

export function sumAll(a: Tensor): Tensor {
  const out = new Tensor(1, 1);
  let acc = 0;
  for (let i = 0; i < a.size; i++) acc += a.data[i];
  out.data[0] = acc;
  return track(out, [a], () => {
    const g = out.grad![0];
    const ga = a.ensureGrad();
    for (let i = 0; i < a.size; i++) ga[i] += g;
  });
}

export function sqrtScalar(a: Tensor): Tensor {
  if (a.size !== 1) throw new Error("sqrtScalar: need [1,1]");
  const out = new Tensor(1, 1);
  out.data[0] = Math.sqrt(a.data[0]);
  return track(out, [a], () => {
    const ga = a.ensureGrad();
    ga[0] += out.grad![0] * 0.5 / Math.sqrt(a.data[0]);
  });
}

/**
 * Max over clip ranges: clips is [N, d]; output row for cell (i, j) with
 * i <= j holds the elementwise max of clip rows i..j; other rows stay 0.
 * Gradient routes to the argmax clip per channel.
 */
export function maxOverSegments(clips: Tensor, nClips: number): Tensor {
  if (clips.rows !== nClips) throw new Error("maxOverSegments: row count");
  const d = clips.cols;
  const out = new Tensor(nClips * nClips, d);
  const argmax = new Int32Array(nClips * nClips * d).fill(-1);
  for (let i = 0; i < nClips; i++) {
    for (let j = i; j < nClips; j++) {
      const cell = i * nClips + j;
      for (let c = 0; c < d; c++) {
        let best = -Infinity;
        let bestRow = -1;
        for (let r = i; r <= j; r++) {
          const v = clips.data[r * d + c];
          if (v > best) {
            best = v;
            bestRow = r;
          }
        }
        out.data[cell * d + c] = best;
        argmax[cell * d + c] = bestRow;
      }
    }
  }
  return track(out, [clips], () => {
    const g = out.grad!;
    const gc = clips.ensureGrad();
    for (let cell = 0; cell < nClips * nClips; cell++) {
      for (let c = 0; c < d; c++) {
        const row = argmax[cell * d + c];
        if (row >= 0) gc[row * d + c] += g[cell * d + c];
      }
    }
  });
}

/**
 * Same-padded 2D convolution over an N x N grid with C channels.
 * input: [N*N, C]; kernel: [K*K*C, F] laid out (ki, kj, c) -> F; bias [1, F].
 */
export function conv2dSame(
  input: Tensor,
  kernel: Tensor,
  bias: Tensor,
  gridSize: number,
  kernelSize: number
): Tensor {
  const C = input.cols;
  const F = kernel.cols;
  if (input.rows !== gridSize * gridSize) throw new Error("conv2dSame: grid");
  if (kernel.rows !== kernelSize * kernelSize * C) throw new Error("conv2dSame: kernel");
  if (bias.rows !== 1 || bias.cols !== F) throw new Error("conv2dSame: bias");
  const half = (kernelSize - 1) / 2;
  if (!Number.isInteger(half)) throw new Error("conv2dSame: odd kernel only");
  const out = new Tensor(gridSize * gridSize, F);
  for (let i = 0; i < gridSize; i++) {
    for (let j = 0; j < gridSize; j++) {
      const cell = i * gridSize + j;
      for (let f = 0; f < F; f++) out.data[cell * F + f] = bias.data[f];
      for (let ki = 0; ki < kernelSize; ki++) {
        const si = i + ki - half;
        if (si < 0 || si >= gridSize) continue;
        for (let kj = 0; kj < kernelSize; kj++) {
          const sj = j + kj - half;
          if (sj < 0 || sj >= gridSize) continue;
          const src = si * gridSize + sj;
          const kBase = (ki * kernelSize + kj) * C;
          for (let c = 0; c < C; c++) {
            const v = input.data[src * C + c];
            if (v === 0) continue;
            const kRow = (kBase + c) * F;
            for (let f = 0; f < F; f++) {
              out.data[cell * F + f] += v * kernel.data[kRow + f];
            }
          }
        }
      }
    }
  }
  return track(out, [input, kernel, bias], () => {
    const g = out.grad!;
    const gi = input.requiresGrad ? input.ensureGrad() : null;
    const gk = kernel.requiresGrad ? kernel.ensureGrad() : null;
    const gb = bias.requiresGrad ? bias.ensureGrad() : null;
    if (gb) {
      for (let cell = 0; cell < gridSize * gridSize; cell++) {
        for (let f = 0; f < F; f++) gb[f] += g[cell * F + f];
      }
    }
    for (let i = 0; i < gridSize; i++) {
      for (let j = 0; j < gridSize; j++) {
        const cell = i * gridSize + j;
        for (let ki = 0; ki < kernelSize; ki++) {
          const si = i + ki - half;
          if (si < 0 || si >= gridSize) continue;
          for (let kj = 0; kj < kernelSize; kj++) {
            const sj = j + kj - half;
            if (sj < 0 || sj >= gridSize) continue;
            const src = si * gridSize + sj;
            const kBase = (ki * kernelSize + kj) * C;
            for (let c = 0; c < C; c++) {
              const v = input.data[src * C + c];
              const kRow = (kBase + c) * F;
              let accInput = 0;
              for (let f = 0; f < F; f++) {
                const gv = g[cell * F + f];
                if (gv === 0) continue;
                if (gk) gk[kRow + f] += v * gv;
                accInput += kernel.data[kRow + f] * gv;
              }
              if (gi) gi[src * C + c] += accInput;
            }
          }
        }
      }
    }
  });
}

/** reverse-topological traversal from `loss`, seeding d(loss)/d(loss) = 1 */
export function backward(loss: Tensor): void {
  if (loss.size !== 1) throw new Error("backward: loss must be scalar");
  const order: Tensor[] = [];
  const seen = new Set<Tensor>();
  const visit = (t: Tensor) => {
    if (seen.has(t)) return;
    seen.add(t);
    for (const p of t.parents) visit(p);
    order.push(t);
  };
  visit(loss);
  loss.ensureGrad()[0] = 1;
  for (let i = order.length - 1; i >= 0; i--) {
    const t = order[i];
    if (t.backwardFn && t.grad) t.backwardFn();
  }
}
