/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_apertures: (a: number) => number;
export const demo_captureRgba: (a: number, b: number) => [number, number];
export const demo_lowSize: (a: number) => number;
export const demo_new: (a: number, b: number, c: number) => [number, number, number];
export const demo_panRgba: (a: number) => [number, number];
export const demo_reconRgba: (a: number) => [number, number];
export const demo_run: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_size: (a: number) => number;
export const demo_spectra: (a: number, b: number, c: number) => [number, number];
export const demo_truthRgba: (a: number) => [number, number];
export const demo_wavelengths: (a: number) => [number, number];
export const notchCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const srFactor: (a: number, b: number, c: number, d: number, e: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
