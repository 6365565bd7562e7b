// End-to-end checks against the real tracking service: the automated
// render-comparison mode and the scripted zero-noise drag.  Spawns the
// python server on an ephemeral port.

import { ChildProcess, spawn } from 'node:child_process';
import { createInterface } from 'node:readline';
import { PNG } from 'pngjs';
import WebSocket from 'ws';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { base64ToBytes, comparisonPoses, runComparison } from '../src/compare';
import { DEFAULT_GEOMETRY, MapImage, Pose } from '../src/cropRender';
import { positionErrorMm } from '../src/ellipse';
import { WsSession } from '../src/net';
import { PointerPoseWire, SessionConfigWire, StateMessage } from '../src/protocol';

let server: ChildProcess;
let serverUrl = '';

const decodePng = async (bytes: Uint8Array) => {
  const png = PNG.sync.read(Buffer.from(bytes));
  return { data: new Uint8Array(png.data), width: png.width, height: png.height };
};

const wsFactory = (url: string) => new WebSocket(url) as unknown as
  import('../src/net').WebSocketLike;

beforeAll(async () => {
  server = spawn('python3', ['-m', 'deskglass.cli', 'serve', '--port', '0'], {
    cwd: new URL('../..', import.meta.url).pathname,
    stdio: ['ignore', 'pipe', 'pipe'],
  });
  const port = await new Promise<number>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error('server did not start')), 15000);
    createInterface({ input: server.stdout! }).on('line', (line) => {
      try {
        const msg = JSON.parse(line);
        if (msg.event === 'listening') {
          clearTimeout(timer);
          resolve(msg.port);
        }
      } catch {
        // non-json startup noise is fine
      }
    });
    server.on('exit', (code) => reject(new Error(`server exited early (${code})`)));
  });
  serverUrl = `ws://127.0.0.1:${port}`;
}, 20000);

afterAll(() => {
  server?.kill();
});

function baseConfig(id: string): SessionConfigWire {
  return {
    session_id: id,
    mode: 'live_pointer',
    rate: 200,
    decimation: 1,
    noise_scale: 0,
    geometry: {
      body_w: DEFAULT_GEOMETRY.bodyW,
      body_h: DEFAULT_GEOMETRY.bodyH,
      screen_offset_x: DEFAULT_GEOMETRY.screenOffsetX,
      screen_offset_y: DEFAULT_GEOMETRY.screenOffsetY,
      screen_w: DEFAULT_GEOMETRY.screenW,
      screen_h: DEFAULT_GEOMETRY.screenH,
      screen_px_w: DEFAULT_GEOMETRY.screenPxW,
      screen_px_h: DEFAULT_GEOMETRY.screenPxH,
    },
    map: { kind: 'noise', width_px: 900, height_px: 700, cell_px: 24, amplitude: 46 },
  };
}

async function openSession(
  id: string,
  onState?: (msg: StateMessage) => void,
): Promise<{ session: WsSession; map: MapImage }> {
  const session = new WsSession(serverUrl, { onState }, wsFactory);
  await session.connect();
  const ack = await session.init(baseConfig(id));
  expect(ack.map).toBeDefined();
  const decoded = await decodePng(base64ToBytes(ack.map_png_base64!));
  return {
    session,
    map: {
      data: decoded.data,
      width: decoded.width,
      height: decoded.height,
      mmPerPx: ack.map!.mm_per_px,
    },
  };
}

describe('live service round trip', () => {
  it(
    'client crop matches server frames within ±1 intensity at 20 poses',
    { timeout: 120000 },
    async () => {
      const { session, map } = await openSession('compare-mode');
      try {
        const reports = await runComparison(
          session, map, DEFAULT_GEOMETRY, decodePng, comparisonPoses(20),
        );
        expect(reports).toHaveLength(20);
        const worst = Math.max(...reports.map((r) => r.maxDiff));
        // eslint-disable-next-line no-console
        console.log(`comparison mode: worst per-channel diff ${worst} across 20 poses`);
        expect(worst).toBeLessThanOrEqual(1);
      } finally {
        session.close();
      }
    },
  );

  it(
    'scripted 50 mm drag at zero noise ends with error readout < 1 mm',
    { timeout: 60000 },
    async () => {
      const states: StateMessage[] = [];
      const { session } = await openSession('drag-50mm', (msg) => states.push(msg));
      try {
        let t = 0;
        const mk = (x: number, contact: boolean): PointerPoseWire => ({
          t, x_mm: x, y_mm: 0, theta_rad: 0, contact, lifting: false,
        });
        // aloft hold (capture), then place at the origin and settle
        const batch: PointerPoseWire[] = [];
        for (let k = 0; k < 66; k++) {
          t = k * 0.02;
          batch.push(mk(0, false));
        }
        session.sendPointerBatch(batch);
        const settle: PointerPoseWire[] = [];
        for (let k = 0; k < 26; k++) {
          t = 1.32 + k * 0.02;
          settle.push(mk(0, true));
        }
        session.sendPointerBatch(settle);

        // brisk 50 mm drag over 0.4 s (symmetric accelerate/decelerate)
        const drag: PointerPoseWire[] = [];
        for (let k = 0; k <= 20; k++) {
          const u = k / 20;
          const s = u < 0.5 ? 2 * u * u : 1 - 2 * (1 - u) * (1 - u);
          t = 1.84 + 0.4 * u;
          drag.push(mk(50 * s, true));
        }
        session.sendPointerBatch(drag);
        const hold: PointerPoseWire[] = [];
        for (let k = 0; k < 31; k++) {
          t = 2.26 + k * 0.02;
          hold.push(mk(50, true));
        }
        session.sendPointerBatch(hold);

        // the state stream is ordered; once we see t >= 2.8 the drag is done
        const finalState = await new Promise<StateMessage>((resolve, reject) => {
          const timer = setTimeout(() => reject(new Error('no final state')), 20000);
          const check = () => {
            const last = states[states.length - 1];
            if (last && last.t >= 2.8) {
              clearTimeout(timer);
              resolve(last);
            } else setTimeout(check, 50);
          };
          check();
        });

        const truth: Pose = { xMm: 50, yMm: 0, theta: 0 };
        const estimate: Pose = {
          xMm: finalState.pose[0],
          yMm: finalState.pose[1],
          theta: finalState.pose[2],
        };
        const errorReadout = positionErrorMm(truth, estimate);
        // eslint-disable-next-line no-console
        console.log(`drag error readout: ${errorReadout.toExponential(2)} mm`);
        expect(errorReadout).toBeLessThan(1.0);
      } finally {
        session.close();
      }
    },
  );
});
