export const clamp = (x, lo, hi) => Math.min(hi, Math.max(lo, x));
export function lerp(a, b, t) {
  return a + (b - a) * t;
}
