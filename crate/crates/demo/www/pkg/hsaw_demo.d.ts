/* tslint:disable */
/* eslint-disable */

/**
 * 64×64 noise-free frame in [−1, 1] followed by the 64×64 flow magnitude in pixels.
 */
export function render(scenario: number, seed: number, t: number): Float32Array;

/**
 * AUC, EER and an SVG plot for scores against 0/1 labels, as JSON.
 */
export function roc_report(scores: Float64Array, labels: Uint8Array): string;

/**
 * Label name of frame `t`.
 */
export function scene_label(scenario: number, seed: number, t: number): string;

/**
 * Frames in one patrol of the scenario.
 */
export function scene_len(scenario: number, seed: number): number;

/**
 * Fits a rows×cols SOM to 2-D points given as x0, y0, x1, y1, …; returns
 * the prototypes in the same layout, row-major over the grid.
 */
export function som_fit(points: Float64Array, rows: number, cols: number, epochs: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly render: (a: number, b: number, c: number) => [number, number, number, number];
    readonly roc_report: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scene_label: (a: number, b: number, c: number) => [number, number, number, number];
    readonly scene_len: (a: number, b: number) => [number, number, number];
    readonly som_fit: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
