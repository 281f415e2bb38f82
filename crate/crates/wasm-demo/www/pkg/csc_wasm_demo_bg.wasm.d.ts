/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_scene_free: (a: number, b: number) => void;
export const scene_atoms: (a: number) => number;
export const scene_coherence: (a: number) => number;
export const scene_generate: (a: number, b: bigint, c: number, d: number, e: number) => [number, number, number, number];
export const scene_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const scene_ompLimit: (a: number) => number;
export const scene_report: (a: number) => [number, number];
export const scene_signalLen: (a: number) => number;
export const scene_solveAdmm: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scene_solveOmp: (a: number) => [number, number, number, number];
export const scene_truth: (a: number) => [number, number];
export const scene_truthDensity: (a: number) => number;
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
