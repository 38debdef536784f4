/**
 * Typed entry points for the token-grouping kernel.
 *
 * `boundMorph` and `boundObjective` hand contiguous float32 matrices to
 * the kernel over its tensor-file wire format and parse the JSON it
 * emits; given the same seed they are numerically and assignment-wise
 * identical to invoking the CLI directly. Local grouping math (apply,
 * expand, alignment loss and gradient) lives in `grouping` and operates
 * on the returned assignment without another kernel round trip.
 */

import { runKernel, scratchDir, KernelOptions } from "./kernel.js";

export {
  KernelInputError,
  KernelNumericError,
  KernelUsageError,
  runKernel,
} from "./kernel.js";
export type { KernelOptions } from "./kernel.js";
export {
  NORM_EPS,
  alignmentLoss,
  alignmentLossGrad,
  applyGrouping,
  expandGrouping,
  validateGrouping,
} from "./grouping.js";
export type { AlignmentReport, Grouping } from "./grouping.js";
export {
  DTYPE_FLOAT32,
  TENSOR_FORMAT_VERSION,
  TENSOR_MAGIC,
  TensorFormatError,
  decodeTensor,
  encodeTensor,
} from "./tensor.js";
export type { Tensor } from "./tensor.js";

export type SplitKind = "random" | "alternating";
export type IntermediateMeanKind = "sizeweighted" | "paperliteral";

export interface MorphRequest {
  seed: number;
  nMin?: number;
  kMax?: number;
  nFinal?: number;
  split?: SplitKind;
  mode?: IntermediateMeanKind;
}

export interface ScheduleRecord {
  nFinal: number;
  k: number;
  counts: number[];
}

export interface MorphResult {
  nTokens: number;
  nGroups: number;
  assignment: Int32Array;
  weights: Int32Array;
  schedule: ScheduleRecord;
  /** Exact stdout bytes of the kernel run, for byte-level comparisons. */
  raw: string;
}

export interface ObjectiveRequest {
  seed: number;
  schedules?: number;
  nMin?: number;
  kMax?: number;
  withGradient?: boolean;
}

export interface ObjectiveResult {
  total: number;
  perSchedule: Array<{ scheduleId: number; schedule: ScheduleRecord; total: number }>;
  gradNorm: number;
  gradient?: Float32Array;
  raw: string;
}

function checkInput(data: unknown, rows: number, cols: number, name: string): Float32Array {
  if (!(data instanceof Float32Array)) {
    throw new TypeError(`${name} must be a Float32Array (32-bit real storage)`);
  }
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 1 || cols < 1) {
    throw new RangeError(`${name} shape ${rows}x${cols} must be positive integers`);
  }
  if (data.length !== rows * cols) {
    throw new RangeError(
      `${name} holds ${data.length} values, shape ${rows}x${cols} needs ${rows * cols}`,
    );
  }
  return data;
}

function checkSeed(seed: number): string {
  if (!Number.isInteger(seed)) {
    throw new TypeError(`seed must be an integer, got ${seed}`);
  }
  return String(seed);
}

/** Group a token matrix; assignment-identical to the CLI at the same seed. */
export function boundMorph(
  targets: Float32Array,
  rows: number,
  cols: number,
  request: MorphRequest,
  opts?: KernelOptions,
): MorphResult {
  checkInput(targets, rows, cols, "targets");
  const scratch = scratchDir();
  try {
    const file = scratch.writeMatrix("targets.dtmt", targets, rows, cols);
    const args = ["morph", "--targets", file, "--seed", checkSeed(request.seed)];
    if (request.nMin !== undefined) args.push("--n-min", String(request.nMin));
    if (request.kMax !== undefined) args.push("--k-max", String(request.kMax));
    if (request.nFinal !== undefined) args.push("--n-final", String(request.nFinal));
    if (request.split) args.push("--split", request.split);
    if (request.mode) args.push("--mode", request.mode);
    const raw = runKernel(args, opts);
    const doc = JSON.parse(raw);
    return {
      nTokens: doc.n,
      nGroups: doc.n_groups,
      assignment: Int32Array.from(doc.assignment as number[]),
      weights: Int32Array.from(doc.weights as number[]),
      schedule: {
        nFinal: doc.schedule.n_final,
        k: doc.schedule.k,
        counts: doc.schedule.counts as number[],
      },
      raw,
    };
  } finally {
    scratch.dispose();
  }
}

/** Multi-schedule alignment objective over an online/target pair. */
export function boundObjective(
  online: Float32Array,
  targets: Float32Array,
  rows: number,
  cols: number,
  request: ObjectiveRequest,
  opts?: KernelOptions,
): ObjectiveResult {
  checkInput(online, rows, cols, "online");
  checkInput(targets, rows, cols, "targets");
  const scratch = scratchDir();
  try {
    const onlineFile = scratch.writeMatrix("online.dtmt", online, rows, cols);
    const targetsFile = scratch.writeMatrix("targets.dtmt", targets, rows, cols);
    const args = [
      "loss",
      "--online", onlineFile,
      "--targets", targetsFile,
      "--seed", checkSeed(request.seed),
    ];
    if (request.schedules !== undefined) args.push("--L", String(request.schedules));
    if (request.nMin !== undefined) args.push("--n-min", String(request.nMin));
    if (request.kMax !== undefined) args.push("--k-max", String(request.kMax));
    if (request.withGradient) args.push("--out-grad", scratch.path("grad.dtmt"));
    const raw = runKernel(args, opts);
    const doc = JSON.parse(raw);
    const result: ObjectiveResult = {
      total: doc.total,
      perSchedule: (doc.per_schedule as any[]).map((entry) => ({
        scheduleId: entry.schedule_id,
        schedule: { nFinal: entry.n_final, k: entry.k, counts: entry.counts as number[] },
        total: entry.total,
      })),
      gradNorm: doc.grad_norm,
      raw,
    };
    if (request.withGradient) {
      const tensor = scratch.readMatrix("grad.dtmt");
      if (tensor.dims.length !== 2 || tensor.dims[0] !== rows || tensor.dims[1] !== cols) {
        throw new RangeError(`gradient tensor has dims ${JSON.stringify(tensor.dims)}`);
      }
      result.gradient = tensor.data;
    }
    return result;
  } finally {
    scratch.dispose();
  }
}

/**
 * Round-trip handshake: verifies the kernel answers on the expected wire
 * format (schema keys and tensor version) before a pipeline relies on it.
 */
export function checkKernel(opts?: KernelOptions): boolean {
  const tokens = Float32Array.from([1, 0, 0, 1]);
  const result = boundMorph(tokens, 2, 2, { seed: 0, nFinal: 2 }, opts);
  return (
    result.nTokens === 2 &&
    result.nGroups === 2 &&
    result.assignment.length === 2 &&
    result.weights.length === 2 &&
    Number.isInteger(result.schedule.k)
  );
}
