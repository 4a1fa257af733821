/**
 * Adam optimization and the per-epoch training loop. Single-threaded and
 * fully deterministic: sample order is fixed by the caller, every gradient
 * comes off the tape, and the optimizer state is keyed by parameter name.
 */

import { GroundingModel, TrainingSample } from "./model";
import { Tensor, backward, scale } from "./tensor";

export interface AdamConfig {
  learningRate: number;
  beta1: number;
  beta2: number;
  epsilon: number;
}

export const DEFAULT_ADAM: AdamConfig = {
  learningRate: 1e-4,
  beta1: 0.9,
  beta2: 0.999,
  epsilon: 1e-8,
};

interface Slot {
  m: Float64Array;
  v: Float64Array;
}

export class Adam {
  private readonly config: AdamConfig;
  private slots = new Map<string, Slot>();
  private step = 0;

  constructor(config: Partial<AdamConfig> = {}) {
    this.config = { ...DEFAULT_ADAM, ...config };
  }

  apply(groups: Array<{ name: string; tensor: Tensor }>): void {
    this.step += 1;
    const { learningRate, beta1, beta2, epsilon } = this.config;
    const correction1 = 1 - Math.pow(beta1, this.step);
    const correction2 = 1 - Math.pow(beta2, this.step);
    for (const { name, tensor } of groups) {
      if (!tensor.grad) continue;
      let slot = this.slots.get(name);
      if (!slot) {
        slot = { m: new Float64Array(tensor.size), v: new Float64Array(tensor.size) };
        this.slots.set(name, slot);
      }
      const g = tensor.grad;
      for (let i = 0; i < tensor.size; i++) {
        slot.m[i] = beta1 * slot.m[i] + (1 - beta1) * g[i];
        slot.v[i] = beta2 * slot.v[i] + (1 - beta2) * g[i] * g[i];
        const mHat = slot.m[i] / correction1;
        const vHat = slot.v[i] / correction2;
        tensor.data[i] -= (learningRate * mHat) / (Math.sqrt(vHat) + epsilon);
      }
    }
  }
}

export interface EpochResult {
  meanLoss: number;
  batches: number;
}

/**
 * One pass over the samples in fixed order, stepping once per batch on the
 * batch-mean loss. Aborts on a non-finite loss with the sample named.
 */
export function trainEpoch(
  model: GroundingModel,
  samples: TrainingSample[],
  optimizer: Adam,
  batchSize: number
): EpochResult {
  if (batchSize < 1) throw new Error("batchSize must be >= 1");
  const groups = model.parameterGroups();
  let totalLoss = 0;
  let batches = 0;
  for (let start = 0; start < samples.length; start += batchSize) {
    const batch = samples.slice(start, start + batchSize);
    for (const { tensor } of groups) tensor.zeroGrad();
    for (const sample of batch) {
      const { total } = model.loss(sample);
      const value = total.item();
      if (!Number.isFinite(value)) {
        throw new Error(
          `non-finite loss ${value} on sample ${sample.pairId} ` +
            `(batch starting at ${start})`
        );
      }
      totalLoss += value;
      backward(scale(total, 1 / batch.length));
    }
    optimizer.apply(groups);
    batches += 1;
  }
  return { meanLoss: totalLoss / samples.length, batches };
}

export function trainEpochs(
  model: GroundingModel,
  samples: TrainingSample[],
  epochs: number,
  batchSize: number,
  learningRate: number
): number[] {
  const optimizer = new Adam({ learningRate });
  const history: number[] = [];
  for (let epoch = 0; epoch < epochs; epoch++) {
    history.push(trainEpoch(model, samples, optimizer, batchSize).meanLoss);
  }
  return history;
}
