/**
 * Binary tensor container shared with the kernel.
 *
 * Layout (little-endian): magic "DTMT", version u32 = 1, dtype u32
 * (1 = 32-bit float), ndim u32, ndim x u64 dims, row-major float32
 * payload. Round trips are bit-exact; reads validate the header before
 * the payload and reject non-finite values, mirroring the kernel side.
 */

export const TENSOR_MAGIC = "DTMT";
export const TENSOR_FORMAT_VERSION = 1;
export const DTYPE_FLOAT32 = 1;

export class TensorFormatError extends Error {}

export interface Tensor {
  dims: number[];
  data: Float32Array;
}

export function encodeTensor(data: Float32Array, dims: number[]): Buffer {
  const count = dims.reduce((a, b) => a * b, 1);
  if (dims.some((d) => !Number.isInteger(d) || d < 0)) {
    throw new TensorFormatError(`invalid dims ${JSON.stringify(dims)}`);
  }
  if (count !== data.length) {
    throw new TensorFormatError(
      `dims ${JSON.stringify(dims)} describe ${count} values, data has ${data.length}`,
    );
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new TensorFormatError(`non-finite value at flat index ${i}`);
    }
  }
  const header = Buffer.alloc(16 + 8 * dims.length);
  header.write(TENSOR_MAGIC, 0, "ascii");
  header.writeUInt32LE(TENSOR_FORMAT_VERSION, 4);
  header.writeUInt32LE(DTYPE_FLOAT32, 8);
  header.writeUInt32LE(dims.length, 12);
  dims.forEach((d, i) => header.writeBigUInt64LE(BigInt(d), 16 + 8 * i));
  const payload = Buffer.alloc(4 * data.length);
  for (let i = 0; i < data.length; i++) {
    payload.writeFloatLE(data[i], 4 * i);
  }
  return Buffer.concat([header, payload]);
}

export function decodeTensor(blob: Buffer): Tensor {
  if (blob.length < 16) {
    throw new TensorFormatError(`file is ${blob.length} bytes, header needs 16`);
  }
  if (blob.toString("ascii", 0, 4) !== TENSOR_MAGIC) {
    throw new TensorFormatError(`bad magic ${JSON.stringify(blob.toString("ascii", 0, 4))}`);
  }
  const version = blob.readUInt32LE(4);
  if (version !== TENSOR_FORMAT_VERSION) {
    throw new TensorFormatError(`unsupported version ${version}`);
  }
  const dtype = blob.readUInt32LE(8);
  if (dtype !== DTYPE_FLOAT32) {
    throw new TensorFormatError(`unsupported dtype code ${dtype}`);
  }
  const ndim = blob.readUInt32LE(12);
  const dimsEnd = 16 + 8 * ndim;
  if (blob.length < dimsEnd) {
    throw new TensorFormatError("file ends inside the dims block");
  }
  const dims: number[] = [];
  let count = 1;
  for (let i = 0; i < ndim; i++) {
    const d = blob.readBigUInt64LE(16 + 8 * i);
    if (d > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new TensorFormatError(`dimension ${d} too large`);
    }
    dims.push(Number(d));
    count *= Number(d);
  }
  if (blob.length - dimsEnd !== 4 * count) {
    throw new TensorFormatError(
      `payload holds ${blob.length - dimsEnd} bytes, dims ${JSON.stringify(dims)} require ${4 * count}`,
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    const v = blob.readFloatLE(dimsEnd + 4 * i);
    if (!Number.isFinite(v)) {
      throw new TensorFormatError(`non-finite value at flat index ${i}`);
    }
    data[i] = v;
  }
  return { dims, data };
}
