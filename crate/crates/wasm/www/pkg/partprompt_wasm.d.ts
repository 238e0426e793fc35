/* tslint:disable */
/* eslint-disable */

/**
 * Synthetic reference/target pair held between calls.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    constructor(parts: number, seed: bigint, noise: number);
    /**
     * Retrieval over `pos_lo..=pos_hi` positives with one negative.
     */
    retrieve(pos_lo: number, pos_hi: number, measure: string, seed: bigint): string;
    /**
     * Grid size and per-cell part labels (-1 for background).
     */
    scene(): string;
    /**
     * Prompts for a fixed part count and the resulting mock mask.
     */
    segment(pos: number, medical: boolean, neg: number, seed: bigint): string;
}

/**
 * Exact and entropic transport plans between two random sets of unit
 * vectors in the plane.
 */
export function transport(n: number, m: number, seed: bigint, epsilon: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_new: (a: number, b: bigint, c: number) => [number, number, number];
    readonly demo_retrieve: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly demo_scene: (a: number) => [number, number];
    readonly demo_segment: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly transport: (a: number, b: number, c: bigint, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
