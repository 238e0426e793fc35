/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_new: (a: number, b: bigint, c: number) => [number, number, number];
export const demo_retrieve: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
export const demo_scene: (a: number) => [number, number];
export const demo_segment: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const transport: (a: number, b: number, c: bigint, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
