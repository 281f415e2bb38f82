/* tslint:disable */
/* eslint-disable */

export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Draws a new signal and returns the observed samples.
     */
    generate(seed: bigint, cardinality: number, amplitude: number, noise: number): Float64Array;
    /**
     * `kind` is "experiment" (n=64, m=2 low-coherence atoms) or "dct".
     */
    constructor(kind: string, n: number, m: number, signal_len: number);
    /**
     * One line describing the last recovery.
     */
    report(): string;
    /**
     * Local ADMM with a fixed penalty.
     */
    solveAdmm(lambda: number, rho: number, max_iterations: number): Float64Array;
    /**
     * Runs OMP for as many steps as the planted code has nonzeros.
     */
    solveOmp(): Float64Array;
    truth(): Float64Array;
    readonly atoms: number;
    readonly coherence: number;
    /**
     * Largest l0,inf for which OMP is guaranteed in the noiseless case.
     */
    readonly ompLimit: number;
    readonly signalLen: number;
    /**
     * l0,inf of the planted code.
     */
    readonly truthDensity: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly scene_atoms: (a: number) => number;
    readonly scene_coherence: (a: number) => number;
    readonly scene_generate: (a: number, b: bigint, c: number, d: number, e: number) => [number, number, number, number];
    readonly scene_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly scene_ompLimit: (a: number) => number;
    readonly scene_report: (a: number) => [number, number];
    readonly scene_signalLen: (a: number) => number;
    readonly scene_solveAdmm: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scene_solveOmp: (a: number) => [number, number, number, number];
    readonly scene_truth: (a: number) => [number, number];
    readonly scene_truthDensity: (a: number) => number;
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
