// Automated comparison mode: place the device at sampled poses, ask the
// server for its rendered frame, and diff it against the client-side crop
// at the same pose.  Validates that local rendering is faithful to within
// one intensity level per channel.

import { Geometry, MapImage, Pose, maxChannelDiff, renderCrop } from './cropRender';
import { PointerPoseWire } from './protocol';
import { WsSession } from './net';

export interface DecodedPng {
  data: Uint8Array | Uint8ClampedArray; // RGBA
  width: number;
  height: number;
}

export type PngDecoder = (bytes: Uint8Array) => Promise<DecodedPng>;

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === 'function') {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, 'base64'));
}

/** Sample poses across the map, mixing headings and an off-edge case. */
export function comparisonPoses(count = 20): Pose[] {
  const poses: Pose[] = [];
  const headings = [0, Math.PI / 2, Math.PI, -Math.PI / 2, 0.6, -1.1, 2.2];
  for (let i = 0; i < count; i++) {
    const angle = (2 * Math.PI * i) / count;
    const radius = 25 + 55 * ((i * 7) % count) / count;
    poses.push({
      xMm: Math.round(radius * Math.cos(angle) * 10) / 10,
      yMm: Math.round(radius * Math.sin(angle) * 10) / 10,
      theta: headings[i % headings.length],
    });
  }
  return poses;
}

export interface ComparisonReport {
  pose: Pose;
  maxDiff: number;
}

/**
 * Drives the live session through place/compare/lift cycles.  At each pose
 * the device is placed exactly there (zero-noise sessions anchor exactly),
 * a server frame is requested, and the client crop is diffed against it.
 */
export async function runComparison(
  session: WsSession,
  map: MapImage,
  geom: Geometry,
  decodePng: PngDecoder,
  poses: Pose[] = comparisonPoses(),
  startT = 1000.0,
): Promise<ComparisonReport[]> {
  const reports: ComparisonReport[] = [];
  let t = startT;
  const step = 0.02;

  const batch = (poseList: PointerPoseWire[]) => session.sendPointerBatch(poseList);

  for (const pose of poses) {
    // hover to the pose, then place and settle so the anchor lands exactly
    const hover: PointerPoseWire[] = [];
    for (let k = 0; k < 8; k++) {
      t += step;
      hover.push({
        t, x_mm: pose.xMm, y_mm: pose.yMm, theta_rad: pose.theta,
        contact: false, lifting: false,
      });
    }
    batch(hover);
    const settle: PointerPoseWire[] = [];
    for (let k = 0; k < 10; k++) {
      t += step;
      settle.push({
        t, x_mm: pose.xMm, y_mm: pose.yMm, theta_rad: pose.theta,
        contact: true, lifting: false,
      });
    }
    batch(settle);

    const frame = await session.requestFrame();
    const server = await decodePng(base64ToBytes(frame.png_base64));
    if (server.width !== geom.screenPxW || server.height !== geom.screenPxH) {
      throw new Error(
        `frame size ${server.width}x${server.height} does not match geometry`,
      );
    }
    const local = renderCrop(pose, geom, map, { sampling: 'bilinear' });
    reports.push({ pose, maxDiff: maxChannelDiff(local, server.data) });

    // lift before moving on
    const lift: PointerPoseWire[] = [];
    for (let k = 0; k < 8; k++) {
      t += step;
      lift.push({
        t, x_mm: pose.xMm, y_mm: pose.yMm, theta_rad: pose.theta,
        contact: false, lifting: true,
      });
    }
    batch(lift);
  }
  return reports;
}
