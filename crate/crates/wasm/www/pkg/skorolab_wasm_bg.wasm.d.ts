/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const fpt_curve: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const simulate_paths: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const skorohod_step_demo: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
