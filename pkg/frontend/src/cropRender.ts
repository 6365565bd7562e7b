// Client-side camouflage crop: for each phone-screen pixel, sample the
// shared background map at the current pose.  The math mirrors the
// service's renderer exactly (pixel-center addressing, identical bounds
// and rounding rules), which is what keeps client crops within +/-1
// intensity of server-rendered frames.

export interface Geometry {
  bodyW: number;
  bodyH: number;
  screenOffsetX: number;
  screenOffsetY: number;
  screenW: number;
  screenH: number;
  screenPxW: number;
  screenPxH: number;
}

export interface MapImage {
  data: Uint8Array | Uint8ClampedArray; // RGBA rows, top-left origin
  width: number;
  height: number;
  mmPerPx: number;
}

export interface Pose {
  xMm: number;
  yMm: number;
  theta: number;
}

export type Sampling = 'nearest' | 'bilinear';

export interface CropOptions {
  sampling?: Sampling;
  fill?: [number, number, number];
}

export const DEFAULT_GEOMETRY: Geometry = {
  bodyW: 75,
  bodyH: 160,
  screenOffsetX: 2.5,
  screenOffsetY: 5,
  screenW: 70,
  screenH: 150,
  screenPxW: 350,
  screenPxH: 750,
};

export function normalizeAngle(theta: number): number {
  const twoPi = 2 * Math.PI;
  let t = theta % twoPi;
  if (t <= -Math.PI) t += twoPi;
  else if (t > Math.PI) t -= twoPi;
  return t;
}

/** RGBA crop of the occluded region, screenPxW x screenPxH. */
export function renderCrop(
  pose: Pose,
  geom: Geometry,
  map: MapImage,
  opts: CropOptions = {},
): Uint8ClampedArray {
  const sampling = opts.sampling ?? 'bilinear';
  const [fr, fg, fb] = opts.fill ?? [24, 24, 24];
  const { width: w, height: h, mmPerPx, data } = map;
  const out = new Uint8ClampedArray(geom.screenPxW * geom.screenPxH * 4);

  const pitchX = geom.screenW / geom.screenPxW;
  const pitchY = geom.screenH / geom.screenPxH;
  const xTl = -geom.bodyW / 2 + geom.screenOffsetX;
  const yTl = geom.bodyH / 2 - geom.screenOffsetY;
  const c = Math.cos(pose.theta);
  const s = Math.sin(pose.theta);

  let o = 0;
  for (let v = 0; v < geom.screenPxH; v++) {
    const yd = yTl - (v + 0.5) * pitchY;
    for (let u = 0; u < geom.screenPxW; u++) {
      const xd = xTl + (u + 0.5) * pitchX;
      const xw = pose.xMm + c * xd - s * yd;
      const yw = pose.yMm + s * xd + c * yd;
      const col = w / 2 + xw / mmPerPx - 0.5;
      const row = h / 2 - yw / mmPerPx - 0.5;
      const inBounds = col >= -0.5 && col < w - 0.5 && row >= -0.5 && row < h - 0.5;
      if (!inBounds) {
        out[o] = fr;
        out[o + 1] = fg;
        out[o + 2] = fb;
        out[o + 3] = 255;
        o += 4;
        continue;
      }
      if (sampling === 'nearest') {
        const ci = Math.min(w - 1, Math.max(0, Math.floor(col + 0.5)));
        const ri = Math.min(h - 1, Math.max(0, Math.floor(row + 0.5)));
        const p = (ri * w + ci) * 4;
        out[o] = data[p];
        out[o + 1] = data[p + 1];
        out[o + 2] = data[p + 2];
      } else {
        const c0 = Math.floor(col);
        const r0 = Math.floor(row);
        const fc = col - c0;
        const frow = row - r0;
        const c0c = Math.min(w - 1, Math.max(0, c0));
        const c1c = Math.min(w - 1, Math.max(0, c0 + 1));
        const r0c = Math.min(h - 1, Math.max(0, r0));
        const r1c = Math.min(h - 1, Math.max(0, r0 + 1));
        const p00 = (r0c * w + c0c) * 4;
        const p01 = (r0c * w + c1c) * 4;
        const p10 = (r1c * w + c0c) * 4;
        const p11 = (r1c * w + c1c) * 4;
        for (let ch = 0; ch < 3; ch++) {
          const top = data[p00 + ch] * (1 - fc) + data[p01 + ch] * fc;
          const bot = data[p10 + ch] * (1 - fc) + data[p11 + ch] * fc;
          const blended = top * (1 - frow) + bot * frow;
          out[o + ch] = Math.min(255, Math.max(0, Math.floor(blended + 0.5)));
        }
      }
      out[o + 3] = 255;
      o += 4;
    }
  }
  return out;
}

/** Source-over composite of an RGBA widget onto an RGBA frame, in place. */
export function overlayWidget(
  frame: Uint8ClampedArray,
  frameW: number,
  widget: Uint8ClampedArray,
  widgetW: number,
  widgetH: number,
  atX: number,
  atY: number,
): void {
  for (let wy = 0; wy < widgetH; wy++) {
    for (let wx = 0; wx < widgetW; wx++) {
      const wp = (wy * widgetW + wx) * 4;
      const alpha = widget[wp + 3] / 255;
      if (alpha === 0) continue;
      const fp = ((atY + wy) * frameW + (atX + wx)) * 4;
      for (let ch = 0; ch < 3; ch++) {
        frame[fp + ch] = Math.floor(
          widget[wp + ch] * alpha + frame[fp + ch] * (1 - alpha) + 0.5,
        );
      }
    }
  }
}

/** Max absolute per-channel difference between two RGB(A) buffers. */
export function maxChannelDiff(
  a: Uint8Array | Uint8ClampedArray,
  b: Uint8Array | Uint8ClampedArray,
  channels = 4,
  skipAlpha = true,
): number {
  if (a.length !== b.length) {
    throw new Error(`buffer size mismatch: ${a.length} vs ${b.length}`);
  }
  let worst = 0;
  for (let i = 0; i < a.length; i++) {
    if (skipAlpha && channels === 4 && i % 4 === 3) continue;
    const d = Math.abs(a[i] - b[i]);
    if (d > worst) worst = d;
  }
  return worst;
}
