/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const penalty_curves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const prox_oracle_check: (a: number, b: bigint) => [number, number, number, number];
export const train_compare: (a: number, b: number, c: bigint, d: bigint, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
