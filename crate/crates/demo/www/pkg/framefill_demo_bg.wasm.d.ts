/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_framefill_free: (a: number, b: number) => void;
export const framefill_diversify: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const framefill_frames: (a: number, b: number, c: number) => [number, number];
export const framefill_infill: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const framefill_new: () => [number, number, number];
export const framefill_suggest: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
