/* tslint:disable */
/* eslint-disable */

/**
 * Synthetic scene, its nine captures and, once run, the reconstruction.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    apertures(): number;
    captureRgba(aperture: number): Uint8Array;
    lowSize(): number;
    constructor(size: number, seed: number, noise: number);
    panRgba(): Uint8Array;
    /**
     * Empty until `run` has been called.
     */
    reconRgba(): Uint8Array;
    /**
     * Runs the pipeline; returns `[rmse_8bit, sam_radians]`.
     */
    run(pansharpen_iters: number, admm_iters: number): Float64Array;
    size(): number;
    /**
     * Truth followed by the reconstruction (if any) at pixel `(x, y)`.
     */
    spectra(x: number, y: number): Float64Array;
    truthRgba(): Uint8Array;
    wavelengths(): Float64Array;
}

/**
 * Transmittance sampled on `start, start + step, ...` (`count` samples).
 */
export function notchCurve(center_nm: number, half_width_nm: number, start_nm: number, step_nm: number, count: number): Float64Array;

export function srFactor(aperture_mm: number, focal_mm: number, pixel_um: number, wavelength_nm: number, apertures: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_apertures: (a: number) => number;
    readonly demo_captureRgba: (a: number, b: number) => [number, number];
    readonly demo_lowSize: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_panRgba: (a: number) => [number, number];
    readonly demo_reconRgba: (a: number) => [number, number];
    readonly demo_run: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_size: (a: number) => number;
    readonly demo_spectra: (a: number, b: number, c: number) => [number, number];
    readonly demo_truthRgba: (a: number) => [number, number];
    readonly demo_wavelengths: (a: number) => [number, number];
    readonly notchCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly srFactor: (a: number, b: number, c: number, d: number, e: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
