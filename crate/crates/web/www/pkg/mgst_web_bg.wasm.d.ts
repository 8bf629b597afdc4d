/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_attentionRgba: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_height: (a: number) => number;
export const demo_iteration: (a: number) => number;
export const demo_losses: (a: number) => [number, number];
export const demo_new: (a: number, b: bigint) => [number, number, number];
export const demo_pupilShift: (a: number) => [number, number, number];
export const demo_restart: (a: number, b: bigint, c: number) => [number, number];
export const demo_rgba: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_setWeights: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const demo_step: (a: number, b: number) => [number, number, number, number];
export const demo_tapCount: (a: number) => number;
export const demo_tapShape: (a: number, b: number) => [number, number, number, number];
export const demo_terms: (a: number) => [number, number];
export const demo_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
