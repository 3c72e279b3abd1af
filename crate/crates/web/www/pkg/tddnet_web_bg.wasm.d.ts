/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_interpolation_free: (a: number, b: number) => void;
export const correlation_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const frequency_response: (a: number, b: number, c: bigint) => [number, number, number, number];
export const interpolation_linear: (a: number) => [number, number];
export const interpolation_linear_nmse: (a: number) => number;
export const interpolation_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const interpolation_pilots: (a: number) => [number, number];
export const interpolation_truth: (a: number) => [number, number];
export const interpolation_wiener: (a: number) => [number, number];
export const interpolation_wiener_nmse: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
