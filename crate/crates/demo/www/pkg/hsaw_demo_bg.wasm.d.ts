/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const render: (a: number, b: number, c: number) => [number, number, number, number];
export const roc_report: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scene_label: (a: number, b: number, c: number) => [number, number, number, number];
export const scene_len: (a: number, b: number) => [number, number, number];
export const som_fit: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
