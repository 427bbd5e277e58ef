/* tslint:disable */
/* eslint-disable */

/**
 * Named series sharing one x axis.
 */
export class Curves {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    count(): number;
    marker(): number;
    name(i: number): string;
    series(i: number): Float64Array;
    x(): Float64Array;
}

export function l2Curves(lam_min: number, lam_max: number, delta_lo: number, delta_hi: number, points: number): Curves;

export function qpCurves(lam_min: number, lam_max: number, alphas: Float64Array, rho_lo: number, rho_hi: number, points: number): Curves;

export function qpTraces(n: number, m: number, cond: number, seed: bigint, tol: number, max_iter: number): Curves;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curves_free: (a: number, b: number) => void;
    readonly curves_count: (a: number) => number;
    readonly curves_marker: (a: number) => number;
    readonly curves_name: (a: number, b: number) => [number, number];
    readonly curves_series: (a: number, b: number) => [number, number];
    readonly curves_x: (a: number) => [number, number];
    readonly l2Curves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly qpCurves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly qpTraces: (a: number, b: number, c: number, d: bigint, e: number, f: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
