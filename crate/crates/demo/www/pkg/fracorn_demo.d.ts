/* tslint:disable */
/* eslint-disable */

/**
 * A Whitney cover: 9 numbers per cell (four corners, then the generation).
 */
export class CoverView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    count(): number;
    readonly c1: number;
    readonly c2: number;
    readonly cells: Float64Array;
    readonly passed: boolean;
}

/**
 * The boundary-layer integral `I(z)` at `points` heights over a flat boundary.
 */
export class Profile {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly distances: Float64Array;
    /**
     * Fitted slope of `log I` against `log dist`; the expected value is `−ps`.
     */
    readonly slope: number;
    readonly values: Float64Array;
}

export function boundary_profile(s: number, p: number, lambda: number, points: number): Profile;

export function extension_field(slope: number, seed: bigint, component: number, res: number): Float64Array;

/**
 * `kind` is `"epigraph"` (graph `param · |x − ½|`) or `"wedge"` (slope `param`).
 */
export function whitney_cover(kind: string, param: number, min_side: number): CoverView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_coverview_free: (a: number, b: number) => void;
    readonly __wbg_profile_free: (a: number, b: number) => void;
    readonly boundary_profile: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly coverview_c1: (a: number) => number;
    readonly coverview_c2: (a: number) => number;
    readonly coverview_cells: (a: number) => [number, number];
    readonly coverview_count: (a: number) => number;
    readonly coverview_passed: (a: number) => number;
    readonly extension_field: (a: number, b: bigint, c: number, d: number) => [number, number, number, number];
    readonly profile_distances: (a: number) => [number, number];
    readonly profile_slope: (a: number) => number;
    readonly profile_values: (a: number) => [number, number];
    readonly whitney_cover: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
