/* tslint:disable */
/* eslint-disable */

/**
 * A particle ensemble evolving under one of the samplers on a 2-D target.
 */
export class ParticleDemo {
    free(): void;
    [Symbol.dispose](): void;
    constructor(target_name: string, method: string, particles: number, h: number, t: number, seed: bigint);
    positions(): Float64Array;
    /**
     * Advances `steps` iterations and returns the positions as x0, y0, x1, y1, ...
     */
    step(steps: number): Float64Array;
}

/**
 * Tensor-train ranks of exp(-V/2) for a target in `dim` dimensions on [-6, 6]^dim.
 */
export function crossRanks(target_name: string, dim: number, tol: number, points_per_unit: number): Uint32Array;

/**
 * Variance iterates of the scalar recursion for target N(0, sigma^2), started at `start_ratio * sigma^2`.
 * Stops early (shorter array) if the recursion leaves its domain.
 */
export function varianceTrace(sigma: number, t: number, h: number, start_ratio: number, iterations: number, corrected: boolean): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_particledemo_free: (a: number, b: number) => void;
    readonly crossRanks: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly particledemo_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
    readonly particledemo_positions: (a: number) => [number, number];
    readonly particledemo_step: (a: number, b: number) => [number, number, number, number];
    readonly varianceTrace: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
