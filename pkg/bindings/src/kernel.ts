/**
 * Process-level bridge to the grouping kernel.
 *
 * The kernel is consumed strictly through its public wire formats: token
 * matrices travel as tensor files, results come back as line-delimited
 * JSON on stdout, and failures surface as a JSON object on stderr with a
 * meaningful exit code. Only the seed crosses the boundary - all
 * randomness stays kernel-side - so a seed reproduces the exact bytes a
 * direct CLI invocation would print.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { decodeTensor, encodeTensor } from "./tensor.js";

export class KernelUsageError extends Error {}
export class KernelInputError extends Error {}
export class KernelNumericError extends Error {}

export interface KernelOptions {
  /** Command line used to invoke the kernel; overridable via DTM_CLI. */
  command?: string[];
}

function kernelCommand(opts?: KernelOptions): string[] {
  if (opts?.command?.length) return opts.command;
  const env = process.env.DTM_CLI;
  if (env) return env.split(" ").filter(Boolean);
  return ["dtm"];
}

function raiseForExit(code: number | null, stderr: string): never {
  let message = stderr.trim();
  try {
    const doc = JSON.parse(stderr);
    message = `${doc.error}: ${doc.message}`;
  } catch {
    /* raw stderr already in message */
  }
  if (code === 1) throw new KernelUsageError(message);
  if (code === 3) throw new KernelNumericError(message);
  throw new KernelInputError(message || `kernel exited with code ${code}`);
}

export function runKernel(args: string[], opts?: KernelOptions): string {
  const [cmd, ...prefix] = kernelCommand(opts);
  const proc = spawnSync(cmd, [...prefix, ...args], {
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (proc.error) {
    throw new KernelInputError(`failed to invoke kernel: ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    raiseForExit(proc.status, proc.stderr ?? "");
  }
  return proc.stdout;
}

export interface MatrixHandle {
  dir: string;
  path: (name: string) => string;
  writeMatrix: (name: string, data: Float32Array, rows: number, cols: number) => string;
  readMatrix: (name: string) => { dims: number[]; data: Float32Array };
  dispose: () => void;
}

export function scratchDir(): MatrixHandle {
  const dir = mkdtempSync(join(tmpdir(), "dtm-bindings-"));
  return {
    dir,
    path: (name) => join(dir, name),
    writeMatrix(name, data, rows, cols) {
      const file = join(dir, name);
      writeFileSync(file, encodeTensor(data, [rows, cols]));
      return file;
    },
    readMatrix(name) {
      return decodeTensor(readFileSync(join(dir, name)));
    },
    dispose() {
      rmSync(dir, { recursive: true, force: true });
    },
  };
}
