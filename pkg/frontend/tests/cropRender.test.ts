import { describe, expect, it } from 'vitest';

import {
  Geometry,
  MapImage,
  maxChannelDiff,
  normalizeAngle,
  overlayWidget,
  renderCrop,
} from '../src/cropRender';
import { covarianceEllipseMm, positionErrorMm } from '../src/ellipse';

function unitGeometry(pxW = 20, pxH = 10): Geometry {
  return {
    bodyW: pxW, bodyH: pxH, screenOffsetX: 0, screenOffsetY: 0,
    screenW: pxW, screenH: pxH, screenPxW: pxW, screenPxH: pxH,
  };
}

// deterministic pseudo-random RGBA map (LCG; only the test depends on it)
function randomMap(w = 100, h = 100, mmPerPx = 1): MapImage {
  const data = new Uint8Array(w * h * 4);
  let s = 12345;
  for (let i = 0; i < data.length; i++) {
    s = (s * 1103515245 + 12345) & 0x7fffffff;
    data[i] = i % 4 === 3 ? 255 : s % 256;
  }
  return { data, width: w, height: h, mmPerPx };
}

function cropOf(map: MapImage, x0: number, y0: number, w: number, h: number): Uint8Array {
  const out = new Uint8Array(w * h * 4);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const src = ((y0 + y) * map.width + (x0 + x)) * 4;
      const dst = (y * w + x) * 4;
      for (let c = 0; c < 4; c++) out[dst + c] = map.data[src + c];
    }
  }
  return out;
}

describe('renderCrop', () => {
  it('identity pose at unit scale equals the central sub-image', () => {
    const map = randomMap();
    const out = renderCrop({ xMm: 0, yMm: 0, theta: 0 }, unitGeometry(), map, {
      sampling: 'nearest',
    });
    expect(maxChannelDiff(out, cropOf(map, 40, 45, 20, 10))).toBe(0);
  });

  it('half-turn pose equals the reversed sub-image', () => {
    const map = randomMap();
    const out = renderCrop({ xMm: 0, yMm: 0, theta: Math.PI }, unitGeometry(), map, {
      sampling: 'nearest',
    });
    const crop = cropOf(map, 40, 45, 20, 10);
    const reversed = new Uint8Array(crop.length);
    for (let y = 0; y < 10; y++) {
      for (let x = 0; x < 20; x++) {
        const src = (y * 20 + x) * 4;
        const dst = ((9 - y) * 20 + (19 - x)) * 4;
        for (let c = 0; c < 4; c++) reversed[dst + c] = crop[src + c];
      }
    }
    expect(maxChannelDiff(out, reversed)).toBe(0);
  });

  it('bilinear aligned sampling matches nearest', () => {
    const map = randomMap();
    const a = renderCrop({ xMm: 0, yMm: 0, theta: 0 }, unitGeometry(), map, {
      sampling: 'bilinear',
    });
    const b = renderCrop({ xMm: 0, yMm: 0, theta: 0 }, unitGeometry(), map, {
      sampling: 'nearest',
    });
    expect(maxChannelDiff(a, b)).toBe(0);
  });

  it('fills out-of-map pixels with the fill color', () => {
    const map = randomMap();
    const out = renderCrop({ xMm: 500, yMm: 0, theta: 0 }, unitGeometry(), map, {
      fill: [7, 8, 9],
    });
    for (let i = 0; i < out.length; i += 4) {
      expect([out[i], out[i + 1], out[i + 2]]).toEqual([7, 8, 9]);
    }
  });

  it('bilinear on a constant map returns the constant', () => {
    const w = 50, h = 50;
    const data = new Uint8Array(w * h * 4);
    for (let i = 0; i < data.length; i += 4) {
      data[i] = 120; data[i + 1] = 7; data[i + 2] = 201; data[i + 3] = 255;
    }
    const map: MapImage = { data, width: w, height: h, mmPerPx: 0.3 };
    const out = renderCrop({ xMm: 1.234, yMm: -2.345, theta: 0.4 }, unitGeometry(8, 6), map);
    for (let i = 0; i < out.length; i += 4) {
      expect([out[i], out[i + 1], out[i + 2]]).toEqual([120, 7, 201]);
    }
  });
});

describe('overlayWidget', () => {
  it('source-over half alpha over black gives mid gray', () => {
    const frame = new Uint8ClampedArray(4 * 4 * 4);
    for (let i = 3; i < frame.length; i += 4) frame[i] = 255;
    const widget = new Uint8ClampedArray([255, 255, 255, 128]);
    overlayWidget(frame, 4, widget, 1, 1, 2, 1);
    const p = (1 * 4 + 2) * 4;
    expect([frame[p], frame[p + 1], frame[p + 2]]).toEqual([128, 128, 128]);
  });
});

describe('pose helpers', () => {
  it('normalizes angles to (-pi, pi]', () => {
    expect(normalizeAngle(3 * Math.PI)).toBeCloseTo(Math.PI, 12);
    expect(normalizeAngle(-Math.PI)).toBeCloseTo(Math.PI, 12);
    expect(normalizeAngle(0.5)).toBe(0.5);
  });

  it('converts covariance diagonal to a 2-sigma ellipse in mm', () => {
    const { rx, ry } = covarianceEllipseMm([1e-6, 4e-6, 0, 0, 0, 0, 0, 0]);
    expect(rx).toBeCloseTo(2.0, 9);
    expect(ry).toBeCloseTo(4.0, 9);
  });

  it('computes the error readout distance', () => {
    const err = positionErrorMm(
      { xMm: 3, yMm: 4, theta: 0 },
      { xMm: 0, yMm: 0, theta: 0 },
    );
    expect(err).toBeCloseTo(5.0, 12);
  });
});
