/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Grayscale RGBA of the attention map at tap `k`.
     */
    attentionRgba(k: number, style: boolean): Uint8Array;
    height(): number;
    iteration(): number;
    /**
     * Loss after each iteration, starting with the initial image.
     */
    losses(): Float64Array;
    constructor(size: number, seed: bigint);
    pupilShift(): number;
    restart(seed: bigint, warm: boolean): void;
    /**
     * RGBA bytes of "content", "style" or "output".
     */
    rgba(view: string): Uint8Array;
    setWeights(alpha: number, beta: number, lambda_g: number, lambda_l: number, theta: number): void;
    /**
     * Runs `n` iterations and returns the status, or "running".
     */
    step(n: number): string;
    /**
     * Number of tap layers in the attention viewer.
     */
    tapCount(): number;
    /**
     * `[layer, height, width]` of tap `k`.
     */
    tapShape(k: number): Uint32Array;
    /**
     * `[content, style, tv, total]` of the current image.
     */
    terms(): Float64Array;
    width(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_attentionRgba: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_height: (a: number) => number;
    readonly demo_iteration: (a: number) => number;
    readonly demo_losses: (a: number) => [number, number];
    readonly demo_new: (a: number, b: bigint) => [number, number, number];
    readonly demo_pupilShift: (a: number) => [number, number, number];
    readonly demo_restart: (a: number, b: bigint, c: number) => [number, number];
    readonly demo_rgba: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_setWeights: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly demo_step: (a: number, b: number) => [number, number, number, number];
    readonly demo_tapCount: (a: number) => number;
    readonly demo_tapShape: (a: number, b: number) => [number, number, number, number];
    readonly demo_terms: (a: number) => [number, number];
    readonly demo_width: (a: number) => number;
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
