/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_coverview_free: (a: number, b: number) => void;
export const __wbg_profile_free: (a: number, b: number) => void;
export const boundary_profile: (a: number, b: number, c: number, d: number) => [number, number, number];
export const coverview_c1: (a: number) => number;
export const coverview_c2: (a: number) => number;
export const coverview_cells: (a: number) => [number, number];
export const coverview_count: (a: number) => number;
export const coverview_passed: (a: number) => number;
export const extension_field: (a: number, b: bigint, c: number, d: number) => [number, number, number, number];
export const profile_distances: (a: number) => [number, number];
export const profile_slope: (a: number) => number;
export const profile_values: (a: number) => [number, number];
export const whitney_cover: (a: number, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
