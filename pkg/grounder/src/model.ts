/**
 * Toy-scale deconfounded moment grounding model.
 *
 * Pipeline per sample: a 3-layer LSTM encodes the query; a two-level
 * attention over the query's verb/noun role tree gates the sentence
 * feature; clip features max-pool into an N x N candidate-moment map; each
 * enabled branch attends from the (query, moment) fusion into a confounder
 * dictionary (fixed cell-position encodings, fixed action-word embeddings,
 * or a learned table) and the branch outputs multiply together before being
 * added back onto the moment map; a small conv stack plus a sigmoid head
 * scores every candidate cell. Training minimizes masked binary
 * cross-entropy against rescaled cell/ground-truth IoU plus a weighted
 * position-reconstruction term that pins moment features to their cell's
 * sinusoidal encoding.
 *
 * Every parameter draws from its own name-derived stream, so two configs
 * that share a submodule initialize it identically no matter what else
 * differs; disabling all branches therefore reproduces the plain base model
 * bit for bit.
 */

import {
  Interval,
  positionEncoding2d,
  predictMoments,
  scaledIouTargets,
  validCellEncodings,
  validCellMask,
  ScoredCandidate,
} from "./encoding";
import { Rng } from "./rng";
import {
  Tensor,
  add,
  addRowVector,
  backward,
  clamp,
  concatCols,
  constant,
  conv2dSame,
  logTensor,
  maskedSum,
  matmul,
  matmulTransposeB,
  maxOverSegments,
  mul,
  mulRowVector,
  parameter,
  relu,
  scale,
  selectRow,
  sigmoid,
  sliceCols,
  softmaxRows,
  sqrtScalar,
  stackRows,
  sub,
  tanh,
} from "./tensor";

export type BranchKind = "location" | "action" | "unobserved";

export interface ModelConfig {
  nClips: number;
  videoDim: number;
  hiddenDim: number;
  posDim: number;
  embedDim: number;
  vocabSize: number;
  heads: number;
  convLayers: number;
  kernelSize: number;
  branches: BranchKind[];
  unobservedDictSize: number;
  /** token ids whose (frozen) embeddings form the action dictionary */
  actionLabelTokens: number[];
  /** two unobserved branches share one init stream when true */
  unobservedSharedInit: boolean;
  iouScaleMin: number;
  iouScaleMax: number;
  lambda: number;
  seed: number;
}

export const DEFAULT_CONFIG: ModelConfig = {
  nClips: 16,
  videoDim: 512,
  hiddenDim: 512,
  posDim: 512,
  embedDim: 512,
  vocabSize: 1000,
  heads: 4,
  convLayers: 4,
  kernelSize: 5,
  branches: ["location", "unobserved", "unobserved"],
  unobservedDictSize: 256,
  actionLabelTokens: [],
  unobservedSharedInit: false,
  iouScaleMin: 0.5,
  iouScaleMax: 1.0,
  lambda: 1.0,
  seed: 0,
};

export interface RoleTree {
  verbs: Array<{ token: number; nouns: number[] }>;
}

export interface TrainingSample {
  pairId: string;
  clipFeatures: Float64Array; // row-major [nClips, videoDim]
  tokenIds: number[];
  tree: RoleTree;
  gt: Interval;
}

interface LstmLayer {
  wInput: Tensor; // [inDim, 4h]
  wHidden: Tensor; // [h, 4h]
  bias: Tensor; // [1, 4h]
}

interface Branch {
  kind: BranchKind;
  dictionary: Tensor; // [entries, videoDim]; trainable only for "unobserved"
  wKey: Tensor; // [videoDim, videoDim]
  wValue: Tensor; // [videoDim, videoDim]
}

export interface BranchTrace {
  output: Tensor; // [N*N, videoDim]
  headWeights: Tensor[]; // per head: [N*N, dictEntries]
  headValues: Tensor[]; // per head: [dictEntries, headDim]
}

export interface ForwardTrace {
  scores: Tensor; // [N*N, 1] after sigmoid, invalid cells zeroed
  logits: Tensor; // [N*N, 1]
  reconLoss: Tensor; // [1,1]
  gatedQuery: Tensor; // [1, hiddenDim]
  sentence: Tensor; // [1, hiddenDim]
  momentMap: Tensor; // [N*N, videoDim]
  branches: BranchTrace[];
}

export class GroundingModel {
  readonly config: ModelConfig;
  readonly embedding: Tensor; // frozen [vocab, embedDim]
  readonly positionTable: Tensor; // frozen M_e [N*N, posDim]
  branchesEnabled = true;

  private lstm: LstmLayer[] = [];
  private wTop: Tensor;
  private wDown: Tensor;
  private wGamma: Tensor; // [2h, 1]
  private wRecon: Tensor;
  private bRecon: Tensor;
  private wQueryFc: Tensor;
  private bQueryFc: Tensor;
  private wQueryFromSentence: Tensor;
  private bQueryFromSentence: Tensor;
  private wQueryFromMap: Tensor;
  private bQueryFromMap: Tensor;
  private branches: Branch[] = [];
  private convKernels: Tensor[] = [];
  private convBiases: Tensor[] = [];
  private wOut: Tensor;
  private bOut: Tensor;
  private maskOneChannel: Float64Array;
  private maskPosChannels: Float64Array;
  private targetsMaskComplement: Float64Array;

  constructor(config: ModelConfig, options: { embedding?: Float64Array } = {}) {
    if (config.hiddenDim !== config.videoDim) {
      throw new Error("hiddenDim must equal videoDim for the fusion product");
    }
    if (config.videoDim % config.heads !== 0) {
      throw new Error("videoDim must be divisible by the head count");
    }
    this.config = config;
    const seed = config.seed;
    const named = (name: string) => Rng.named(seed, name);

    this.embedding = constant(config.vocabSize, config.embedDim);
    if (options.embedding) {
      if (options.embedding.length !== this.embedding.size) {
        throw new Error(
          `embedding table length ${options.embedding.length} != ` +
            `${config.vocabSize}x${config.embedDim}`
        );
      }
      this.embedding.data.set(options.embedding);
    } else {
      const embRng = named("embedding");
      for (let i = 0; i < this.embedding.size; i++) {
        this.embedding.data[i] = embRng.gaussian();
      }
    }

    let inDim = config.embedDim;
    for (let layer = 0; layer < 3; layer++) {
      this.lstm.push({
        wInput: parameter(inDim, 4 * config.hiddenDim, named(`lstm${layer}.wInput`)),
        wHidden: parameter(
          config.hiddenDim,
          4 * config.hiddenDim,
          named(`lstm${layer}.wHidden`)
        ),
        bias: parameter(1, 4 * config.hiddenDim, named(`lstm${layer}.bias`), 0.01),
      });
      inDim = config.hiddenDim;
    }

    const h = config.hiddenDim;
    this.wTop = parameter(h, h, named("tree.wTop"));
    this.wDown = parameter(h, h, named("tree.wDown"));
    this.wGamma = parameter(2 * h, 1, named("tree.wGamma"));

    this.wRecon = parameter(config.videoDim, config.posDim, named("recon.weight"));
    this.bRecon = parameter(1, config.posDim, named("recon.bias"), 0.01);

    const d = config.videoDim;
    this.wQueryFc = parameter(d, d, named("dictQuery.fc"));
    this.bQueryFc = parameter(1, d, named("dictQuery.fcBias"), 0.01);
    this.wQueryFromSentence = parameter(d, d, named("dictQuery.fromSentence"));
    this.bQueryFromSentence = parameter(1, d, named("dictQuery.fromSentenceBias"), 0.01);
    this.wQueryFromMap = parameter(d, d, named("dictQuery.fromMap"));
    this.bQueryFromMap = parameter(1, d, named("dictQuery.fromMapBias"), 0.01);

    this.positionTable = positionEncoding2d(config.nClips, config.posDim);

    let unobservedSeen = 0;
    config.branches.forEach((kind, index) => {
      const tag = `branch${index}.${kind}`;
      let dictionary: Tensor;
      if (kind === "location") {
        dictionary = validCellEncodings(config.nClips, d);
      } else if (kind === "action") {
        if (config.actionLabelTokens.length === 0) {
          throw new Error("action branch needs actionLabelTokens");
        }
        dictionary = constant(config.actionLabelTokens.length, d);
        config.actionLabelTokens.forEach((tok, row) => {
          if (tok < 0 || tok >= config.vocabSize) {
            throw new Error(`action label token ${tok} outside vocabulary`);
          }
          if (config.embedDim !== d) {
            throw new Error("action dictionary needs embedDim == videoDim");
          }
          dictionary.data.set(
            this.embedding.data.subarray(tok * d, (tok + 1) * d),
            row * d
          );
        });
      } else {
        const streamName = config.unobservedSharedInit
          ? "dict.unobserved.shared"
          : `dict.unobserved.${unobservedSeen}`;
        unobservedSeen += 1;
        const t = new Tensor(config.unobservedDictSize, d, undefined, true);
        const rng = named(streamName);
        for (let i = 0; i < t.size; i++) t.data[i] = rng.gaussian();
        dictionary = t;
      }
      this.branches.push({
        kind,
        dictionary,
        wKey: parameter(d, d, named(`${tag}.wKey`)),
        wValue: parameter(d, d, named(`${tag}.wValue`)),
      });
    });

    const K = config.kernelSize;
    for (let layer = 0; layer < config.convLayers; layer++) {
      this.convKernels.push(
        parameter(K * K * d, d, named(`conv${layer}.kernel`), 1 / Math.sqrt(K * K * d))
      );
      this.convBiases.push(parameter(1, d, named(`conv${layer}.bias`), 0.01));
    }
    this.wOut = parameter(d, 1, named("out.weight"));
    this.bOut = parameter(1, 1, named("out.bias"), 0.01);

    this.maskOneChannel = validCellMask(config.nClips, 1);
    this.maskPosChannels = validCellMask(config.nClips, config.posDim);
    this.targetsMaskComplement = this.maskOneChannel;
  }

  /** named trainable tensors; branch parameters drop out when disabled */
  parameterGroups(): Array<{ name: string; tensor: Tensor }> {
    const groups: Array<{ name: string; tensor: Tensor }> = [];
    this.lstm.forEach((layer, i) => {
      groups.push({ name: `lstm${i}.wInput`, tensor: layer.wInput });
      groups.push({ name: `lstm${i}.wHidden`, tensor: layer.wHidden });
      groups.push({ name: `lstm${i}.bias`, tensor: layer.bias });
    });
    groups.push({ name: "tree.wTop", tensor: this.wTop });
    groups.push({ name: "tree.wDown", tensor: this.wDown });
    groups.push({ name: "tree.wGamma", tensor: this.wGamma });
    groups.push({ name: "recon.weight", tensor: this.wRecon });
    groups.push({ name: "recon.bias", tensor: this.bRecon });
    if (this.branchesEnabled && this.branches.length > 0) {
      groups.push({ name: "dictQuery.fc", tensor: this.wQueryFc });
      groups.push({ name: "dictQuery.fcBias", tensor: this.bQueryFc });
      groups.push({ name: "dictQuery.fromSentence", tensor: this.wQueryFromSentence });
      groups.push({
        name: "dictQuery.fromSentenceBias",
        tensor: this.bQueryFromSentence,
      });
      groups.push({ name: "dictQuery.fromMap", tensor: this.wQueryFromMap });
      groups.push({ name: "dictQuery.fromMapBias", tensor: this.bQueryFromMap });
      this.branches.forEach((branch, i) => {
        const tag = `branch${i}.${branch.kind}`;
        if (branch.dictionary.requiresGrad) {
          groups.push({ name: `${tag}.dictionary`, tensor: branch.dictionary });
        }
        groups.push({ name: `${tag}.wKey`, tensor: branch.wKey });
        groups.push({ name: `${tag}.wValue`, tensor: branch.wValue });
      });
    }
    this.convKernels.forEach((k, i) => {
      groups.push({ name: `conv${i}.kernel`, tensor: k });
      groups.push({ name: `conv${i}.bias`, tensor: this.convBiases[i] });
    });
    groups.push({ name: "out.weight", tensor: this.wOut });
    groups.push({ name: "out.bias", tensor: this.bOut });
    return groups;
  }

  zeroOutputLayer(): void {
    this.wOut.data.fill(0);
    this.bOut.data.fill(0);
  }

  zeroBranchValueProjection(index: number): void {
    this.branches[index].wValue.data.fill(0);
  }

  /** token states from the top LSTM layer plus the final state */
  encodeQuery(tokenIds: number[]): { states: Tensor; sentence: Tensor } {
    if (tokenIds.length === 0) {
      throw new Error("cannot encode an empty sentence");
    }
    const h = this.config.hiddenDim;
    let inputs: Tensor[] = tokenIds.map((tok) => {
      if (tok < 0 || tok >= this.config.vocabSize) {
        throw new Error(`token id ${tok} outside vocabulary`);
      }
      return selectRow(this.embedding, tok);
    });
    let topStates: Tensor[] = inputs;
    for (const layer of this.lstm) {
      const outputs: Tensor[] = [];
      let hPrev = constant(1, h);
      let cPrev = constant(1, h);
      for (const x of topStates) {
        const gates = addRowVector(
          add(matmul(x, layer.wInput), matmul(hPrev, layer.wHidden)),
          layer.bias
        );
        const iGate = sigmoid(sliceCols(gates, 0, h));
        const fGate = sigmoid(sliceCols(gates, h, h));
        const gGate = tanh(sliceCols(gates, 2 * h, h));
        const oGate = sigmoid(sliceCols(gates, 3 * h, h));
        cPrev = add(mul(fGate, cPrev), mul(iGate, gGate));
        hPrev = mul(oGate, tanh(cPrev));
        outputs.push(hPrev);
      }
      topStates = outputs;
    }
    return {
      states: stackRows(topStates),
      sentence: topStates[topStates.length - 1],
    };
  }

  private attentionLogit(context: Tensor, node: Tensor): Tensor {
    const joint = tanh(
      concatCols(matmul(context, this.wTop), matmul(node, this.wDown))
    );
    return matmul(joint, this.wGamma); // [1,1]
  }

  /**
   * Two-level attention over the role tree; the averaged subtree features
   * gate the sentence feature: gated = sentence + sentence * meanSubtree.
   */
  treeAttention(tree: RoleTree, states: Tensor, sentence: Tensor): Tensor {
    if (tree.verbs.length === 0) {
      throw new Error("role tree needs at least one verb");
    }
    const verbStates = tree.verbs.map((v) => selectRow(states, v.token));
    const verbLogits = tree.verbs.map((_, k) =>
      this.attentionLogit(sentence, verbStates[k])
    );
    const verbWeights = softmaxRows(rowOfScalars(verbLogits));
    // [1, K] x [K, h]
    const verbSummary = matmul(verbWeights, stackRows(verbStates));

    const subtreeFeatures: Tensor[] = [];
    tree.verbs.forEach((verb, k) => {
      const nounStates = verb.nouns.map((tok) => selectRow(states, tok));
      const nounLogits = nounStates.map((nodeState) =>
        this.attentionLogit(verbSummary, nodeState)
      );
      const weights = softmaxRows(rowOfScalars([verbLogits[k], ...nounLogits]));
      const nodes = stackRows([verbStates[k], ...nounStates]);
      subtreeFeatures.push(matmul(weights, nodes)); // [1, 1+L] x [1+L, h]
    });
    let meanSubtree = subtreeFeatures[0];
    for (let k = 1; k < subtreeFeatures.length; k++) {
      meanSubtree = add(meanSubtree, subtreeFeatures[k]);
    }
    meanSubtree = scale(meanSubtree, 1 / subtreeFeatures.length);
    return gateQuery(sentence, meanSubtree);
  }

  buildMomentMap(clipFeatures: Float64Array): Tensor {
    const { nClips, videoDim } = this.config;
    if (clipFeatures.length !== nClips * videoDim) {
      throw new Error(
        `clip features length ${clipFeatures.length} != ${nClips}x${videoDim}`
      );
    }
    const clips = constant(nClips, videoDim, Float64Array.from(clipFeatures));
    return maxOverSegments(clips, nClips);
  }

  reconstructionLoss(momentMap: Tensor): Tensor {
    const projected = tanh(
      addRowVector(matmul(momentMap, this.wRecon), this.bRecon)
    );
    const diff = sub(projected, this.positionTable);
    return sqrtScalar(maskedSum(mul(diff, diff), this.maskPosChannels));
  }

  branchOutput(index: number, momentMap: Tensor, gatedQuery: Tensor): BranchTrace {
    const { videoDim: d, heads } = this.config;
    const branch = this.branches[index];
    const headDim = d / heads;
    const fromSentence = addRowVector(
      matmul(gatedQuery, this.wQueryFromSentence),
      this.bQueryFromSentence
    );
    const fromMap = addRowVector(
      matmul(momentMap, this.wQueryFromMap),
      this.bQueryFromMap
    );
    const query = addRowVector(
      matmul(addRowVector(fromMap, fromSentence), this.wQueryFc),
      this.bQueryFc
    ); // [N*N, d]
    const keys = matmul(branch.dictionary, branch.wKey); // [Nk, d]
    const values = matmul(branch.dictionary, branch.wValue); // [Nk, d]

    const headOutputs: Tensor[] = [];
    const headWeights: Tensor[] = [];
    const headValues: Tensor[] = [];
    for (let i = 0; i < heads; i++) {
      const q = sliceCols(query, i * headDim, headDim);
      const k = sliceCols(keys, i * headDim, headDim);
      const v = sliceCols(values, i * headDim, headDim);
      const weights = softmaxRows(
        scale(matmulTransposeB(q, k), 1 / Math.sqrt(headDim))
      ); // [N*N, Nk]
      headWeights.push(weights);
      headValues.push(v);
      headOutputs.push(matmul(weights, v)); // [N*N, headDim]
    }
    let output = headOutputs[0];
    for (let i = 1; i < headOutputs.length; i++) {
      output = concatCols(output, headOutputs[i]);
    }
    return { output, headWeights, headValues };
  }

  forward(sample: TrainingSample): ForwardTrace {
    const { nClips, lambda } = this.config;
    const { states, sentence } = this.encodeQuery(sample.tokenIds);
    const gatedQuery = this.treeAttention(sample.tree, states, sentence);
    const momentMap = this.buildMomentMap(sample.clipFeatures);
    const reconLoss = this.reconstructionLoss(momentMap);

    const branchTraces: BranchTrace[] = [];
    let fusedInput = momentMap;
    if (this.branchesEnabled && this.branches.length > 0) {
      this.branches.forEach((_, i) => {
        branchTraces.push(this.branchOutput(i, momentMap, gatedQuery));
      });
      let combined = branchTraces[0].output;
      for (let i = 1; i < branchTraces.length; i++) {
        combined = mul(combined, branchTraces[i].output);
      }
      fusedInput = add(momentMap, combined);
    }

    let grid = mulRowVector(fusedInput, gatedQuery);
    for (let layer = 0; layer < this.config.convLayers; layer++) {
      grid = relu(
        conv2dSame(
          grid,
          this.convKernels[layer],
          this.convBiases[layer],
          nClips,
          this.config.kernelSize
        )
      );
    }
    const logits = addRowVector(matmul(grid, this.wOut), this.bOut); // [N*N,1]
    const scoresRaw = sigmoid(logits);
    const scores = maskScores(scoresRaw, this.maskOneChannel);
    return {
      scores,
      logits,
      reconLoss,
      gatedQuery,
      sentence,
      momentMap,
      branches: branchTraces,
    };
  }

  loss(sample: TrainingSample): { total: Tensor; trace: ForwardTrace } {
    const { nClips, iouScaleMin, iouScaleMax, lambda } = this.config;
    const trace = this.forward(sample);
    const targets = scaledIouTargets(sample.gt, nClips, iouScaleMin, iouScaleMax);
    const bce = bceOverValidCells(trace.scores, targets, this.maskOneChannel);
    const total = add(bce, scale(trace.reconLoss, lambda));
    return { total, trace };
  }

  predict(sample: TrainingSample, n: number, nmsIoU: number): ScoredCandidate[] {
    const trace = this.forward(sample);
    return predictMoments(trace.scores.data, this.config.nClips, n, nmsIoU);
  }
}

/** gated combination: sentence + sentence (*) gate (identity when gate = 0) */
export function gateQuery(sentence: Tensor, gate: Tensor): Tensor {
  return add(sentence, mul(sentence, gate));
}

/** [1,1] scalars concatenated into one [1,k] row */
function rowOfScalars(scalars: Tensor[]): Tensor {
  let row = scalars[0];
  for (let i = 1; i < scalars.length; i++) row = concatCols(row, scalars[i]);
  return row;
}

const BCE_EPS = 1e-7;

export function bceOverValidCells(
  scores: Tensor,
  targets: Float64Array,
  mask: Float64Array
): Tensor {
  if (scores.cols !== 1 || scores.rows !== targets.length) {
    throw new Error("bce: score/target shape mismatch");
  }
  const y = constant(scores.rows, 1, Float64Array.from(targets));
  const oneMinusY = constant(scores.rows, 1);
  const ones = constant(scores.rows, 1);
  for (let i = 0; i < scores.rows; i++) {
    oneMinusY.data[i] = 1 - targets[i];
    ones.data[i] = 1;
  }
  const clamped = clamp(scores, BCE_EPS, 1 - BCE_EPS);
  const positive = mul(y, logTensor(clamped));
  const negative = mul(oneMinusY, logTensor(sub(ones, clamped)));
  return scale(maskedSum(add(positive, negative), mask), -1);
}

/** zero out invalid cells without letting gradient leak through them */
function maskScores(scores: Tensor, mask: Float64Array): Tensor {
  const masked = constant(scores.rows, scores.cols, Float64Array.from(mask));
  return mul(scores, masked);
}
