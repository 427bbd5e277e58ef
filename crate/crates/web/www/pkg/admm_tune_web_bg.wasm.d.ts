/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curves_free: (a: number, b: number) => void;
export const curves_count: (a: number) => number;
export const curves_marker: (a: number) => number;
export const curves_name: (a: number, b: number) => [number, number];
export const curves_series: (a: number, b: number) => [number, number];
export const curves_x: (a: number) => [number, number];
export const l2Curves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const qpCurves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const qpTraces: (a: number, b: number, c: number, d: bigint, e: number, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
