/** Latent-space explorer state: 8 sliders plus a decode-length slider. */

export const LATENT_DIM = 8;
export const T_MIN = 2;
export const T_MAX = 30;

export interface LatentState {
  z: number[];
  T: number;
}

export function initialLatentState(): LatentState {
  return { z: new Array(LATENT_DIM).fill(0), T: 10 };
}

export function setSlider(state: LatentState, dim: number, value: number): LatentState {
  if (dim < 0 || dim >= LATENT_DIM) throw new Error(`latent dim ${dim} out of range`);
  const z = state.z.slice();
  z[dim] = Math.min(2, Math.max(-2, value));
  return { z, T: state.T };
}

export function setLength(state: LatentState, T: number): LatentState {
  return { z: state.z.slice(), T: Math.min(T_MAX, Math.max(T_MIN, Math.round(T))) };
}

export function isCentered(state: LatentState): boolean {
  return state.z.every((v) => v === 0);
}
