/**
 * File plumbing shared with the benchmark toolkit:
 *   - canonical pair files (one JSON record per line) and split files are
 *     read exactly as the toolkit writes them;
 *   - predictions go out in its prediction-record format so they can be
 *     scored with `moment-bench score`;
 *   - clip features live in per-video text files with a shape header;
 *   - role trees come from a JSONL sidecar, with a lexicon-based fallback
 *     builder for synthetic data.
 */

import * as fs from "fs";
import * as path from "path";

import { Interval } from "./encoding";
import { RoleTree } from "./model";
import { Rng } from "./rng";

export interface PairRecord {
  pairId: string;
  videoId: string;
  durationS: number;
  startNorm: number;
  endNorm: number;
  query: string;
}

export function parseCanonicalPairs(text: string): PairRecord[] {
  const out: PairRecord[] = [];
  text.split("\n").forEach((line, idx) => {
    if (!line.trim()) return;
    let rec: any;
    try {
      rec = JSON.parse(line);
    } catch (err) {
      throw new Error(`pair record ${idx + 1}: invalid JSON`);
    }
    for (const field of ["pair_id", "video_id", "duration_s", "start_norm", "end_norm", "query"]) {
      if (!(field in rec)) {
        throw new Error(`pair record ${idx + 1}: missing field ${field}`);
      }
    }
    out.push({
      pairId: String(rec.pair_id),
      videoId: String(rec.video_id),
      durationS: Number(rec.duration_s),
      startNorm: Number(rec.start_norm),
      endNorm: Number(rec.end_norm),
      query: String(rec.query),
    });
  });
  return out;
}

export function parseSplitFile(text: string): Map<string, string> {
  const doc = JSON.parse(text);
  if (doc.kind !== "split-assignment") {
    throw new Error("not a split-assignment document");
  }
  const out = new Map<string, string>();
  for (const splitName of Object.keys(doc.splits)) {
    for (const pid of doc.splits[splitName]) out.set(pid, splitName);
  }
  return out;
}

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[a-z0-9]+/g) ?? [];
}

export class Vocabulary {
  readonly tokenToId = new Map<string, number>();
  readonly tokens: string[] = ["<unk>"];

  static fromQueries(queries: string[]): Vocabulary {
    const vocab = new Vocabulary();
    const unique = new Set<string>();
    for (const q of queries) for (const t of tokenize(q)) unique.add(t);
    for (const token of [...unique].sort()) {
      vocab.tokenToId.set(token, vocab.tokens.length);
      vocab.tokens.push(token);
    }
    return vocab;
  }

  get size(): number {
    return this.tokens.length;
  }

  encode(query: string): number[] {
    const ids = tokenize(query).map((t) => this.tokenToId.get(t) ?? 0);
    return ids.length > 0 ? ids : [0];
  }
}

// -- clip features -----------------------------------------------------------

export function clipFeaturePath(dir: string, videoId: string): string {
  return path.join(dir, `${videoId}.clips.txt`);
}

export function writeClipFeatures(
  dir: string,
  videoId: string,
  features: Float64Array,
  nClips: number,
  dim: number
): void {
  if (features.length !== nClips * dim) throw new Error("feature shape mismatch");
  const lines = [`${nClips} ${dim}`];
  for (let i = 0; i < nClips; i++) {
    const row: string[] = [];
    for (let c = 0; c < dim; c++) row.push(String(features[i * dim + c]));
    lines.push(row.join(" "));
  }
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(clipFeaturePath(dir, videoId), lines.join("\n") + "\n");
}

export function readClipFeatures(
  dir: string,
  videoId: string
): { features: Float64Array; nClips: number; dim: number } {
  const text = fs.readFileSync(clipFeaturePath(dir, videoId), "utf-8");
  const lines = text.split("\n").filter((l) => l.trim());
  const [nClips, dim] = lines[0].split(/\s+/).map(Number);
  if (!Number.isInteger(nClips) || !Number.isInteger(dim)) {
    throw new Error(`${videoId}: bad shape header`);
  }
  if (lines.length !== nClips + 1) {
    throw new Error(`${videoId}: expected ${nClips} rows, got ${lines.length - 1}`);
  }
  const features = new Float64Array(nClips * dim);
  for (let i = 0; i < nClips; i++) {
    const row = lines[i + 1].split(/\s+/).map(Number);
    if (row.length !== dim) throw new Error(`${videoId}: row ${i} width ${row.length}`);
    features.set(row, i * dim);
  }
  return { features, nClips, dim };
}

// -- role trees ---------------------------------------------------------------

export function parseTreeFile(text: string): Map<string, RoleTree> {
  const out = new Map<string, RoleTree>();
  text.split("\n").forEach((line, idx) => {
    if (!line.trim()) return;
    const rec = JSON.parse(line);
    if (!rec.pair_id || !Array.isArray(rec.verbs)) {
      throw new Error(`tree record ${idx + 1}: needs pair_id and verbs`);
    }
    out.set(String(rec.pair_id), {
      verbs: rec.verbs.map((v: any) => ({
        token: Number(v.token),
        nouns: (v.nouns ?? []).map(Number),
      })),
    });
  });
  return out;
}

export function writeTreeFile(trees: Map<string, RoleTree>): string {
  const lines: string[] = [];
  for (const pairId of [...trees.keys()].sort()) {
    const tree = trees.get(pairId)!;
    lines.push(
      JSON.stringify({
        pair_id: pairId,
        verbs: tree.verbs.map((v) => ({ token: v.token, nouns: v.nouns })),
      })
    );
  }
  return lines.join("\n") + (lines.length ? "\n" : "");
}

const FALLBACK_VERBS = new Set([
  "open", "close", "hold", "put", "take", "walk", "run", "sit", "stand",
  "eat", "drink", "play", "turn", "look", "watch", "wash", "pour", "throw",
  "read", "write", "cook", "fix", "talk", "jump", "dance", "lift", "push",
  "pull", "grab", "reach", "carry", "clean", "point", "wave", "smile",
]);

const FALLBACK_STOPWORDS = new Set([
  "a", "an", "the", "is", "are", "was", "were", "and", "or", "of", "to",
  "in", "on", "at", "then", "while", "with", "person", "someone", "they",
]);

function matchesVerbLexicon(token: string): boolean {
  if (FALLBACK_VERBS.has(token)) return true;
  for (const suffix of ["ing", "ed", "es", "s"]) {
    if (token.length > suffix.length && token.endsWith(suffix)) {
      const stem = token.slice(0, -suffix.length);
      if (FALLBACK_VERBS.has(stem) || FALLBACK_VERBS.has(stem + "e")) return true;
      if (stem.length >= 2 && stem[stem.length - 1] === stem[stem.length - 2]
          && FALLBACK_VERBS.has(stem.slice(0, -1))) return true;
    }
  }
  return false;
}

/**
 * Lexicon-driven stand-in for a real semantic-role parse: verb tokens
 * become verb nodes, remaining non-stopword tokens become leaves of the
 * nearest verb. Guarantees at least one verb (token 0 if nothing matches).
 */
export function fallbackTree(tokens: string[]): RoleTree {
  const verbIndices: number[] = [];
  tokens.forEach((t, i) => {
    if (matchesVerbLexicon(t)) verbIndices.push(i);
  });
  if (verbIndices.length === 0) verbIndices.push(0);
  const verbs = verbIndices.map((token) => ({ token, nouns: [] as number[] }));
  tokens.forEach((t, i) => {
    if (verbIndices.includes(i) || FALLBACK_STOPWORDS.has(t)) return;
    let best = 0;
    let bestDist = Infinity;
    verbIndices.forEach((v, k) => {
      const dist = Math.abs(v - i);
      if (dist < bestDist) {
        bestDist = dist;
        best = k;
      }
    });
    verbs[best].nouns.push(i);
  });
  return { verbs };
}

// -- word embeddings ------------------------------------------------------------

/** GloVe-style text table: one `token v1 v2 ... vd` line per word. */
export function parseEmbeddingTable(
  text: string
): { dim: number; vectors: Map<string, Float64Array> } {
  const vectors = new Map<string, Float64Array>();
  let dim = -1;
  text.split("\n").forEach((line, idx) => {
    if (!line.trim()) return;
    const fields = line.trim().split(/\s+/);
    const values = fields.slice(1).map(Number);
    if (values.some((v) => !Number.isFinite(v))) {
      throw new Error(`embedding line ${idx + 1}: non-numeric value`);
    }
    if (dim === -1) dim = values.length;
    if (values.length !== dim) {
      throw new Error(
        `embedding line ${idx + 1}: width ${values.length}, expected ${dim}`
      );
    }
    vectors.set(fields[0], Float64Array.from(values));
  });
  if (dim <= 0) throw new Error("empty embedding table");
  return { dim, vectors };
}

/**
 * Dense [vocab.size, dim] matrix for a vocabulary: table rows where the
 * token is known, seeded random draws (per token, order-independent) for
 * the rest, including the <unk> row.
 */
export function embeddingMatrixFor(
  vocab: Vocabulary,
  table: { dim: number; vectors: Map<string, Float64Array> },
  seed: number
): Float64Array {
  const out = new Float64Array(vocab.size * table.dim);
  vocab.tokens.forEach((token, id) => {
    const known = table.vectors.get(token);
    if (known) {
      out.set(known, id * table.dim);
    } else {
      const rng = Rng.named(seed, `embedding.${token}`);
      for (let c = 0; c < table.dim; c++) out[id * table.dim + c] = rng.gaussian();
    }
  });
  return out;
}

// -- predictions --------------------------------------------------------------

export function writePredictions(
  predictions: Map<string, Interval[]>
): string {
  const lines: string[] = [];
  for (const pairId of [...predictions.keys()].sort()) {
    const cands = predictions.get(pairId)!;
    lines.push(
      JSON.stringify({
        pair_id: pairId,
        candidates: cands.map((c) => [c.start, c.end]),
        unit: "norm",
      })
    );
  }
  return lines.join("\n") + (lines.length ? "\n" : "");
}

// -- synthetic toy data --------------------------------------------------------

export interface SyntheticDataset {
  pairsText: string;
  trees: Map<string, RoleTree>;
  features: Map<string, Float64Array>;
  records: PairRecord[];
}

const SYNTH_OBJECTS = [
  "door", "book", "cup", "box", "chair", "window", "bag", "lamp",
  "table", "phone", "towel", "shelf",
];
const SYNTH_VERBS = [
  "opens", "closes", "holds", "takes", "washes", "reads", "lifts", "turns",
  "carries", "cleans", "grabs", "pours",
];

/**
 * Deterministic toy corpus: every sample's ground truth sits exactly on a
 * candidate cell, and each sample gets a distinctive verb/object pair so a
 * capable model can memorize the mapping.
 */
export function synthesizeToyDataset(
  count: number,
  nClips: number,
  videoDim: number,
  seed: number
): SyntheticDataset {
  const rng = new Rng(seed);
  const records: PairRecord[] = [];
  const trees = new Map<string, RoleTree>();
  const features = new Map<string, Float64Array>();
  const pairLines: string[] = [];
  const durationS = 100.0;

  const cells: Array<[number, number]> = [];
  for (let i = 0; i < nClips; i++) {
    for (let j = i; j < nClips; j++) cells.push([i, j]);
  }

  for (let s = 0; s < count; s++) {
    const videoId = `toy${String(s).padStart(3, "0")}`;
    const pairId = `${videoId}#0`;
    const [ci, cj] = cells[rng.int(cells.length)];
    const startNorm = ci / nClips;
    const endNorm = (cj + 1) / nClips;
    const verb = SYNTH_VERBS[s % SYNTH_VERBS.length];
    const object = SYNTH_OBJECTS[(s * 7 + 3) % SYNTH_OBJECTS.length];
    const query = `person ${verb} the ${object}`;

    const clip = new Float64Array(nClips * videoDim);
    for (let i = 0; i < clip.length; i++) clip[i] = rng.gaussian();
    features.set(videoId, clip);

    records.push({
      pairId,
      videoId,
      durationS,
      startNorm,
      endNorm,
      query,
    });
    pairLines.push(
      JSON.stringify({
        duration_s: durationS,
        end_norm: endNorm,
        end_s: endNorm * durationS,
        pair_id: pairId,
        query,
        start_norm: startNorm,
        start_s: startNorm * durationS,
        tokens: null,
        video_id: videoId,
      })
    );
    trees.set(pairId, fallbackTree(tokenize(query)));
  }
  return {
    pairsText: pairLines.join("\n") + "\n",
    trees,
    features,
    records,
  };
}
