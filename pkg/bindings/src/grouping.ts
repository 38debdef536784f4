/**
 * Local grouping math over a hard assignment.
 *
 * These mirror the kernel's semantics - float64 accumulation in ascending
 * token order, epsilon-floored norms, degenerate group means scoring
 * distance 1 with a zero gradient, bitwise-equal pairs scoring exactly 0 -
 * so pooling, broadcasting, and the alignment loss can run host-side once
 * a grouping has been fetched.
 */

export const NORM_EPS = 1e-12;

export interface Grouping {
  nTokens: number;
  nGroups: number;
  assignment: Int32Array;
  weights: Int32Array;
}

export function validateGrouping(g: Grouping): void {
  if (g.assignment.length !== g.nTokens || g.nTokens < 1) {
    throw new RangeError(`assignment has ${g.assignment.length} entries for nTokens=${g.nTokens}`);
  }
  if (g.nGroups < 1 || g.nGroups > g.nTokens) {
    throw new RangeError(`nGroups=${g.nGroups} outside [1, ${g.nTokens}]`);
  }
  const counts = new Int32Array(g.nGroups);
  for (const a of g.assignment) {
    if (a < 0 || a >= g.nGroups) throw new RangeError(`group id ${a} outside [0, ${g.nGroups})`);
    counts[a] += 1;
  }
  for (let i = 0; i < g.nGroups; i++) {
    if (counts[i] === 0) throw new RangeError(`group ${i} is empty`);
    if (counts[i] !== g.weights[i]) {
      throw new RangeError(`weights[${i}]=${g.weights[i]} but ${counts[i]} tokens are assigned`);
    }
  }
}

function checkMatrix(data: Float32Array, rows: number, cols: number, name: string): void {
  if (!(data instanceof Float32Array)) {
    throw new TypeError(`${name} must be a Float32Array`);
  }
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 1 || cols < 1) {
    throw new RangeError(`${name} shape ${rows}x${cols} must be positive integers`);
  }
  if (data.length !== rows * cols) {
    throw new RangeError(`${name} has ${data.length} values, shape ${rows}x${cols} needs ${rows * cols}`);
  }
}

/** Per-group flat means: (nGroups x cols) in float64. */
export function applyGrouping(g: Grouping, tokens: Float32Array, cols: number): Float64Array {
  checkMatrix(tokens, g.nTokens, cols, "tokens");
  const out = new Float64Array(g.nGroups * cols);
  for (let j = 0; j < g.nTokens; j++) {
    const gid = g.assignment[j];
    for (let c = 0; c < cols; c++) {
      out[gid * cols + c] += tokens[j * cols + c];
    }
  }
  for (let i = 0; i < g.nGroups; i++) {
    const w = g.weights[i];
    for (let c = 0; c < cols; c++) {
      out[i * cols + c] /= w;
    }
  }
  return out;
}

/** Broadcast group rows back over token positions: row j = pooled[g(j)]. */
export function expandGrouping(g: Grouping, pooled: Float64Array, cols: number): Float64Array {
  if (pooled.length !== g.nGroups * cols) {
    throw new RangeError(`pooled has ${pooled.length} values, expected ${g.nGroups * cols}`);
  }
  const out = new Float64Array(g.nTokens * cols);
  for (let j = 0; j < g.nTokens; j++) {
    const gid = g.assignment[j];
    for (let c = 0; c < cols; c++) {
      out[j * cols + c] = pooled[gid * cols + c];
    }
  }
  return out;
}

function rowStats(u: Float64Array, v: Float64Array, row: number, cols: number) {
  let dot = 0;
  let nu = 0;
  let nv = 0;
  let equal = true;
  for (let c = 0; c < cols; c++) {
    const a = u[row * cols + c];
    const b = v[row * cols + c];
    dot += a * b;
    nu += a * a;
    nv += b * b;
    if (a !== b) equal = false;
  }
  return { dot, nu: Math.sqrt(nu), nv: Math.sqrt(nv), equal };
}

export interface AlignmentReport {
  total: number;
  perGroup: Float64Array;
}

/** Sum over groups of group size times the cosine distance of the means. */
export function alignmentLoss(
  g: Grouping,
  online: Float32Array,
  targets: Float32Array,
  cols: number,
): AlignmentReport {
  const uHat = applyGrouping(g, online, cols);
  const vHat = applyGrouping(g, targets, cols);
  const perGroup = new Float64Array(g.nGroups);
  let total = 0;
  for (let i = 0; i < g.nGroups; i++) {
    const { dot, nu, nv, equal } = rowStats(uHat, vHat, i, cols);
    let cos: number;
    if (nu <= NORM_EPS || nv <= NORM_EPS) {
      cos = 0;
    } else if (equal) {
      cos = 1;
    } else {
      cos = Math.min(1, Math.max(-1, dot / (Math.max(nu, NORM_EPS) * Math.max(nv, NORM_EPS))));
    }
    perGroup[i] = g.weights[i] * (1 - cos);
    total += perGroup[i];
  }
  return { total, perGroup };
}

/** Gradient of the alignment loss for each online token (targets fixed). */
export function alignmentLossGrad(
  g: Grouping,
  online: Float32Array,
  targets: Float32Array,
  cols: number,
): Float64Array {
  const uHat = applyGrouping(g, online, cols);
  const vHat = applyGrouping(g, targets, cols);
  const groupGrad = new Float64Array(g.nGroups * cols);
  for (let i = 0; i < g.nGroups; i++) {
    const { dot, nu, nv, equal } = rowStats(uHat, vHat, i, cols);
    if (nu <= NORM_EPS || nv <= NORM_EPS || equal) {
      continue;
    }
    for (let c = 0; c < cols; c++) {
      const u = uHat[i * cols + c];
      const v = vHat[i * cols + c];
      groupGrad[i * cols + c] = -(v / (nu * nv) - (dot * u) / (nu * nu * nu * nv));
    }
  }
  const out = new Float64Array(g.nTokens * cols);
  for (let j = 0; j < g.nTokens; j++) {
    const gid = g.assignment[j];
    for (let c = 0; c < cols; c++) {
      out[j * cols + c] = groupGrad[gid * cols + c];
    }
  }
  return out;
}
