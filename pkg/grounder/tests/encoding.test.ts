import { describe, expect, it } from "vitest";

import {
  cellInterval,
  intervalIoU,
  positionEncoding2d,
  predictMoments,
  scaledIouTargets,
  sinusoidalEncoding,
  validCellEncodings,
  validCells,
} from "../src/encoding";
import { Rng } from "../src/rng";

describe("interval helpers", () => {
  it("cell (i, j) covers [i/N, (j+1)/N]", () => {
    expect(cellInterval(0, 0, 4)).toEqual({ start: 0, end: 0.25 });
    expect(cellInterval(1, 2, 4)).toEqual({ start: 0.25, end: 0.75 });
    expect(cellInterval(0, 3, 4)).toEqual({ start: 0, end: 1 });
  });

  it("iou basics", () => {
    expect(intervalIoU({ start: 0.2, end: 0.6 }, { start: 0.2, end: 0.6 })).toBe(1);
    expect(intervalIoU({ start: 0, end: 0.3 }, { start: 0.5, end: 0.9 })).toBe(0);
    expect(
      intervalIoU({ start: 0.2, end: 0.6 }, { start: 0.4, end: 0.8 })
    ).toBeCloseTo(0.2 / 0.6, 12);
  });
});

describe("position encoding", () => {
  it("cell (0,0) channel 0 is sin(0) = 0", () => {
    const enc = positionEncoding2d(16, 512);
    expect(enc.at(0, 0)).toBe(0);
  });

  it("odd dimension is rejected", () => {
    expect(() => positionEncoding2d(4, 7)).toThrow(/even/);
  });

  it("all 136 valid cells are pairwise distinct at N=16, d=512", () => {
    const enc = validCellEncodings(16, 512);
    expect(enc.rows).toBe((16 * 17) / 2);
    for (let a = 0; a < enc.rows; a++) {
      for (let b = a + 1; b < enc.rows; b++) {
        let dist = 0;
        for (let c = 0; c < enc.cols; c++) {
          const d = enc.at(a, c) - enc.at(b, c);
          dist += d * d;
        }
        expect(dist).toBeGreaterThan(0);
      }
    }
  });

  it("is parameter-free and identical across builds", () => {
    const a = positionEncoding2d(8, 32);
    const b = positionEncoding2d(8, 32);
    expect([...a.data]).toEqual([...b.data]);
  });

  it("splits channels between start and end indices", () => {
    const enc = positionEncoding2d(4, 8);
    const cellA = 0 * 4 + 2; // (0,2)
    const cellB = 1 * 4 + 2; // (1,2): same end index, different start
    const first = [0, 1, 2, 3].map((c) => enc.data[cellA * 8 + c]);
    const firstB = [0, 1, 2, 3].map((c) => enc.data[cellB * 8 + c]);
    const second = [4, 5, 6, 7].map((c) => enc.data[cellA * 8 + c]);
    const secondB = [4, 5, 6, 7].map((c) => enc.data[cellB * 8 + c]);
    expect(first).not.toEqual(firstB);
    expect(second).toEqual(secondB);
    expect(secondB).toEqual([...sinusoidalEncoding(2, 4)]);
  });
});

describe("scaled IoU targets", () => {
  it("matches the benchmark toolkit's interval IoU on the 10-cell case", () => {
    // expected values computed with the toolkit's iou implementation for
    // N=4, gt=[0.25, 0.75], scaling (0.5, 1.0), then frozen here
    const expected: Array<[number, number, number]> = [
      [0, 0, 0.0],
      [0, 1, 0.0],
      [0, 2, 0.33333333333333326],
      [0, 3, 0.0],
      [1, 1, 0.0],
      [1, 2, 1.0],
      [1, 3, 0.33333333333333326],
      [2, 2, 0.0],
      [2, 3, 0.0],
      [3, 3, 0.0],
    ];
    const targets = scaledIouTargets({ start: 0.25, end: 0.75 }, 4, 0.5, 1.0);
    for (const [i, j, y] of expected) {
      expect(Math.abs(targets[i * 4 + j] - y)).toBeLessThan(1e-12);
    }
  });

  it("exact cell match scores 1", () => {
    const targets = scaledIouTargets({ start: 0.25, end: 0.75 }, 4, 0.5, 1.0);
    expect(targets[1 * 4 + 2]).toBe(1);
  });

  it("raw iou at or below the floor clamps to 0", () => {
    const targets = scaledIouTargets({ start: 0, end: 0.25 }, 4, 0.5, 1.0);
    expect(targets[0 * 4 + 3]).toBe(0); // iou 0.25 <= 0.5
  });

  it("invalid thresholds are rejected", () => {
    expect(() => scaledIouTargets({ start: 0, end: 1 }, 4, 0.9, 0.5)).toThrow();
  });
});

describe("greedy suppression", () => {
  function bruteForceNms(
    scores: Float64Array,
    nClips: number,
    n: number,
    nmsIoU: number
  ) {
    const cells = validCells(nClips);
    const order = cells
      .map(([i, j], idx) => ({ idx, score: scores[i * nClips + j] }))
      .sort((a, b) => (b.score - a.score) || (a.idx - b.idx));
    const kept: Array<{ start: number; end: number }> = [];
    for (const { idx } of order) {
      const [i, j] = cells[idx];
      const candidate = cellInterval(i, j, nClips);
      let suppressed = false;
      for (const k of kept) {
        if (intervalIoU(candidate, k) > nmsIoU) {
          suppressed = true;
          break;
        }
      }
      if (!suppressed) kept.push(candidate);
      if (kept.length === n) break;
    }
    return kept;
  }

  it("single dominant cell is rank 1", () => {
    const scores = new Float64Array(16);
    scores[1 * 4 + 2] = 0.9;
    const out = predictMoments(scores, 4, 3, 0.5);
    expect(out[0].interval).toEqual({ start: 0.25, end: 0.75 });
  });

  it("heavily overlapping runner-up is suppressed", () => {
    const scores = new Float64Array(16);
    scores[0 * 4 + 3] = 0.9; // [0, 1]
    scores[0 * 4 + 2] = 0.8; // [0, 0.75]: iou 0.75 > 0.5 with the winner
    scores[2 * 4 + 3] = 0.7; // [0.5, 1]: iou 0.5, kept
    const out = predictMoments(scores, 4, 2, 0.5);
    expect(out.map((c) => c.interval)).toEqual([
      { start: 0, end: 1 },
      { start: 0.5, end: 1 },
    ]);
  });

  it("returns all survivors when n exceeds them", () => {
    const scores = new Float64Array(16);
    scores[0 * 4 + 3] = 0.9;
    const out = predictMoments(scores, 4, 10, 0.0);
    // iou 0 bar suppresses every overlapping candidate; [0,1] overlaps all
    expect(out).toHaveLength(1);
  });

  it("matches the brute-force oracle on random 4x4 maps", () => {
    const rng = new Rng(7);
    for (let trial = 0; trial < 50; trial++) {
      const scores = new Float64Array(16);
      for (const [i, j] of validCells(4)) scores[i * 4 + j] = rng.next();
      const fast = predictMoments(scores, 4, 3, 0.5).map((c) => c.interval);
      const slow = bruteForceNms(scores, 4, 3, 0.5);
      expect(fast).toEqual(slow);
    }
  });
});
