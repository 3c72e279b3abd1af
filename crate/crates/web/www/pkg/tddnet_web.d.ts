/* tslint:disable */
/* eslint-disable */

/**
 * One noisy pilot observation interpolated by the linear and Wiener baselines.
 */
export class Interpolation {
    free(): void;
    [Symbol.dispose](): void;
    linear(): Float64Array;
    constructor(_class: string, spacing: number, snr_db: number, seed: bigint);
    pilots(): Uint32Array;
    truth(): Float64Array;
    wiener(): Float64Array;
    readonly linear_nmse: number;
    readonly wiener_nmse: number;
}

/**
 * `|R(d)|` for lags `0..=max_lag` subcarriers.
 */
export function correlation_curve(_class: string, max_lag: number): Float64Array;

/**
 * `|H(n)|^2` in dB over 256 subcarriers for one random realization.
 */
export function frequency_response(_class: string, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_interpolation_free: (a: number, b: number) => void;
    readonly correlation_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly frequency_response: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly interpolation_linear: (a: number) => [number, number];
    readonly interpolation_linear_nmse: (a: number) => number;
    readonly interpolation_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly interpolation_pilots: (a: number) => [number, number];
    readonly interpolation_truth: (a: number) => [number, number];
    readonly interpolation_wiener: (a: number) => [number, number];
    readonly interpolation_wiener_nmse: (a: number) => number;
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
