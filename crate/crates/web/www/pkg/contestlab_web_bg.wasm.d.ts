/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const optimal_design: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const phi_curves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const power_statics: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
