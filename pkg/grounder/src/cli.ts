/**
 * Thin command-line front end:
 *
 *   synth --out DIR [--samples 8 --clips 8 --dim 8 --seed 0]
 *       write a toy corpus: canonical pair file, per-video clip features,
 *       role-tree sidecar.
 *
 *   train --pairs F --features DIR --trees F --out-preds F
 *         [--split F --train-subset train --predict-subset test-iid]
 *         [--epochs 100 --batch-size 8 --lr 0.001 --seed 0 --clips 8
 *          --dim 8 --pos-dim 8 --heads 2 --conv-layers 2 --kernel 3
 *          --branches location,unobserved,unobserved --n 5 --nms-iou 0.5]
 *       train on the (subset of the) pair file and write predictions in the
 *       scorer's record format.
 */

import * as fs from "fs";
import * as path from "path";

import {
  PairRecord,
  Vocabulary,
  embeddingMatrixFor,
  fallbackTree,
  parseCanonicalPairs,
  parseEmbeddingTable,
  parseSplitFile,
  parseTreeFile,
  readClipFeatures,
  synthesizeToyDataset,
  tokenize,
  writeClipFeatures,
  writePredictions,
  writeTreeFile,
} from "./data";
import { Interval } from "./encoding";
import { BranchKind, DEFAULT_CONFIG, GroundingModel, TrainingSample } from "./model";
import { trainEpochs } from "./train";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad flag pair near ${key}`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function need(flags: Map<string, string>, key: string): string {
  const v = flags.get(key);
  if (v === undefined) throw new Error(`missing required flag --${key}`);
  return v;
}

function num(flags: Map<string, string>, key: string, dflt: number): number {
  const v = flags.get(key);
  return v === undefined ? dflt : Number(v);
}

function cmdSynth(argv: string[]): number {
  const flags = parseFlags(argv);
  const outDir = need(flags, "out");
  const samples = num(flags, "samples", 8);
  const clips = num(flags, "clips", 8);
  const dim = num(flags, "dim", 8);
  const seed = num(flags, "seed", 0);

  const data = synthesizeToyDataset(samples, clips, dim, seed);
  fs.mkdirSync(outDir, { recursive: true });
  fs.writeFileSync(path.join(outDir, "pairs.canon"), data.pairsText);
  fs.writeFileSync(path.join(outDir, "trees.jsonl"), writeTreeFile(data.trees));
  const featDir = path.join(outDir, "features");
  for (const [videoId, features] of data.features) {
    writeClipFeatures(featDir, videoId, features, clips, dim);
  }
  process.stderr.write(
    `wrote ${samples} toy samples (${clips} clips x ${dim} dims) to ${outDir}\n`
  );
  return 0;
}

function loadSamples(
  records: PairRecord[],
  featureDir: string,
  treeFile: string | undefined,
  vocab: Vocabulary
): TrainingSample[] {
  const trees = treeFile
    ? parseTreeFile(fs.readFileSync(treeFile, "utf-8"))
    : new Map<string, import("./model").RoleTree>();
  return records.map((rec) => {
    const { features } = readClipFeatures(featureDir, rec.videoId);
    const tree = trees.get(rec.pairId) ?? fallbackTree(tokenize(rec.query));
    return {
      pairId: rec.pairId,
      clipFeatures: features,
      tokenIds: vocab.encode(rec.query),
      tree,
      gt: { start: rec.startNorm, end: rec.endNorm },
    };
  });
}

function cmdTrain(argv: string[]): number {
  const flags = parseFlags(argv);
  const pairsFile = need(flags, "pairs");
  const featureDir = need(flags, "features");
  const outPreds = need(flags, "out-preds");
  const treeFile = flags.get("trees");

  const records = parseCanonicalPairs(fs.readFileSync(pairsFile, "utf-8"));
  let trainRecords = records;
  let predictRecords = records;
  if (flags.has("split")) {
    const split = parseSplitFile(fs.readFileSync(need(flags, "split"), "utf-8"));
    const trainName = flags.get("train-subset") ?? "train";
    const predictName = flags.get("predict-subset") ?? "test-iid";
    trainRecords = records.filter((r) => split.get(r.pairId) === trainName);
    predictRecords = records.filter((r) => split.get(r.pairId) === predictName);
    if (trainRecords.length === 0) throw new Error(`empty subset ${trainName}`);
    if (predictRecords.length === 0) throw new Error(`empty subset ${predictName}`);
  }

  const vocab = Vocabulary.fromQueries(records.map((r) => r.query));
  const branches = (flags.get("branches") ?? "location,unobserved,unobserved")
    .split(",")
    .filter((b) => b.length > 0) as BranchKind[];
  const dim = num(flags, "dim", 8);
  let embedding: Float64Array | undefined;
  if (flags.has("embeddings")) {
    const table = parseEmbeddingTable(
      fs.readFileSync(need(flags, "embeddings"), "utf-8")
    );
    if (table.dim !== dim) {
      throw new Error(`embedding table dim ${table.dim} != model dim ${dim}`);
    }
    embedding = embeddingMatrixFor(vocab, table, num(flags, "seed", 0));
  }
  const model = new GroundingModel({
    ...DEFAULT_CONFIG,
    nClips: num(flags, "clips", 8),
    videoDim: dim,
    hiddenDim: dim,
    embedDim: dim,
    posDim: num(flags, "pos-dim", dim),
    heads: num(flags, "heads", 2),
    convLayers: num(flags, "conv-layers", 2),
    kernelSize: num(flags, "kernel", 3),
    unobservedDictSize: num(flags, "dict-size", 32),
    branches,
    vocabSize: vocab.size,
    seed: num(flags, "seed", 0),
  }, { embedding });

  const trainSamples = loadSamples(trainRecords, featureDir, treeFile, vocab);
  const history = trainEpochs(
    model,
    trainSamples,
    num(flags, "epochs", 100),
    num(flags, "batch-size", 8),
    num(flags, "lr", 1e-3)
  );
  process.stderr.write(
    `trained ${history.length} epochs; loss ${history[0].toFixed(4)} -> ` +
      `${history[history.length - 1].toFixed(4)}\n`
  );

  const predictSamples = loadSamples(predictRecords, featureDir, treeFile, vocab);
  const predictions = new Map<string, Interval[]>();
  const n = num(flags, "n", 5);
  const nmsIoU = num(flags, "nms-iou", 0.5);
  for (const sample of predictSamples) {
    predictions.set(
      sample.pairId,
      model.predict(sample, n, nmsIoU).map((c) => c.interval)
    );
  }
  fs.mkdirSync(path.dirname(path.resolve(outPreds)), { recursive: true });
  fs.writeFileSync(outPreds, writePredictions(predictions));
  process.stderr.write(
    `wrote ${predictions.size} prediction records to ${outPreds}\n`
  );
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "synth") return cmdSynth(rest);
    if (command === "train") return cmdTrain(rest);
    process.stderr.write(
      "usage: grounder <synth|train> [flags]\n"
    );
    return 1;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
