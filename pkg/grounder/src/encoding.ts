/**
 * Cell/interval geometry and the fixed sinusoidal position table.
 *
 * An N-clip video yields an N x N candidate grid where cell (i, j), i <= j,
 * covers the normalized interval [i/N, (j+1)/N]. Only the upper triangle is
 * valid; lower-triangle cells are dead weight kept for the square layout.
 */

import { Tensor, constant } from "./tensor";

export interface Interval {
  start: number;
  end: number;
}

export function cellInterval(i: number, j: number, nClips: number): Interval {
  return { start: i / nClips, end: (j + 1) / nClips };
}

export function intervalIoU(a: Interval, b: Interval): number {
  const inter = Math.min(a.end, b.end) - Math.max(a.start, b.start);
  if (inter <= 0) return 0;
  const union = Math.max(a.end, b.end) - Math.min(a.start, b.start);
  if (union <= 0) return 0;
  return inter / union;
}

export function validCellMask(nClips: number, channels: number): Float64Array {
  const mask = new Float64Array(nClips * nClips * channels);
  for (let i = 0; i < nClips; i++) {
    for (let j = i; j < nClips; j++) {
      const base = (i * nClips + j) * channels;
      for (let c = 0; c < channels; c++) mask[base + c] = 1;
    }
  }
  return mask;
}

export function validCells(nClips: number): Array<[number, number]> {
  const cells: Array<[number, number]> = [];
  for (let i = 0; i < nClips; i++) {
    for (let j = i; j < nClips; j++) cells.push([i, j]);
  }
  return cells;
}

/** classic interleaved sin/cos ladder for one index, dim channels */
export function sinusoidalEncoding(position: number, dim: number): Float64Array {
  const out = new Float64Array(dim);
  for (let t = 0; t < dim; t += 2) {
    const angle = position / Math.pow(10000, t / dim);
    out[t] = Math.sin(angle);
    if (t + 1 < dim) out[t + 1] = Math.cos(angle);
  }
  return out;
}

/**
 * Parameter-free 2D cell encoding: first dim/2 channels encode the start
 * index, last dim/2 the end index. Invalid cells are all-zero.
 */
export function positionEncoding2d(nClips: number, dim: number): Tensor {
  if (dim % 2 !== 0) {
    throw new Error(`position encoding dim must be even, got ${dim}`);
  }
  const half = dim / 2;
  const out = constant(nClips * nClips, dim);
  for (let i = 0; i < nClips; i++) {
    const encI = sinusoidalEncoding(i, half);
    for (let j = i; j < nClips; j++) {
      const encJ = sinusoidalEncoding(j, half);
      const base = (i * nClips + j) * dim;
      out.data.set(encI, base);
      out.data.set(encJ, base + half);
    }
  }
  return out;
}

/** encodings of the valid cells only, one row per cell in (i, j) order */
export function validCellEncodings(nClips: number, dim: number): Tensor {
  const cells = validCells(nClips);
  const full = positionEncoding2d(nClips, dim);
  const out = constant(cells.length, dim);
  cells.forEach(([i, j], row) => {
    const base = (i * nClips + j) * dim;
    out.data.set(full.data.subarray(base, base + dim), row * dim);
  });
  return out;
}

/**
 * Per-cell regression targets: the cell/ground-truth IoU rescaled so that
 * values at or below `tMin` become 0 and `tMax` maps to 1.
 */
export function scaledIouTargets(
  gt: Interval,
  nClips: number,
  tMin: number,
  tMax: number
): Float64Array {
  if (!(tMin >= 0 && tMin < tMax && tMax <= 1)) {
    throw new Error(`invalid IoU scaling thresholds (${tMin}, ${tMax})`);
  }
  const out = new Float64Array(nClips * nClips);
  for (let i = 0; i < nClips; i++) {
    for (let j = i; j < nClips; j++) {
      const raw = intervalIoU(cellInterval(i, j, nClips), gt);
      const y = (raw - tMin) / (tMax - tMin);
      out[i * nClips + j] = Math.min(Math.max(y, 0), 1);
    }
  }
  return out;
}

export interface ScoredCandidate {
  interval: Interval;
  score: number;
  cell: [number, number];
}

/**
 * Greedy non-maximum suppression over the valid cells of a score map.
 * Candidates overlapping a kept candidate with IoU > nmsIoU are dropped;
 * ties in score break on cell order for determinism.
 */
export function predictMoments(
  scores: Float64Array,
  nClips: number,
  n: number,
  nmsIoU: number
): ScoredCandidate[] {
  const cells = validCells(nClips);
  const order = cells
    .map(([i, j], idx) => ({ idx, score: scores[i * nClips + j] }))
    .sort((a, b) => (b.score - a.score) || (a.idx - b.idx));
  const kept: ScoredCandidate[] = [];
  for (const { idx, score } of order) {
    const [i, j] = cells[idx];
    const interval = cellInterval(i, j, nClips);
    if (kept.every((k) => intervalIoU(interval, k.interval) <= nmsIoU)) {
      kept.push({ interval, score, cell: [i, j] });
      if (kept.length === n) break;
    }
  }
  return kept;
}
