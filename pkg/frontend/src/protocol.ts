// Wire protocol for the tracking session service (JSON over websocket).
// Field names must match the server exactly.

export interface GeometryWire {
  body_w: number;
  body_h: number;
  screen_offset_x: number;
  screen_offset_y: number;
  screen_w: number;
  screen_h: number;
  screen_px_w: number;
  screen_px_h: number;
}

export interface MagnetWire {
  position_mm: [number, number, number];
  moment: [number, number, number];
  ambient_uT?: [number, number, number];
  sensor_height_mm?: number;
}

export interface SessionConfigWire {
  session_id: string;
  mode: 'replay' | 'live_imu' | 'live_pointer';
  rate?: number;
  decimation?: number;
  noise_scale?: number;
  seed?: number;
  zupt_enabled?: boolean;
  geometry?: GeometryWire;
  placement_pose?: [number, number, number];
  magnet?: MagnetWire | null;
  map?: Record<string, unknown>;
  frame_delivery?: 'poses_only' | 'server_rendered';
}

export interface PointerPoseWire {
  t: number;
  x_mm: number;
  y_mm: number;
  theta_rad: number;
  contact: boolean;
  lifting: boolean;
}

export interface AckMessage {
  type: 'ack';
  session_id: string;
  rate?: number;
  reset?: boolean;
  map?: { mm_per_px: number; width_px: number; height_px: number };
  map_png_base64?: string;
}

export interface StateMessage {
  type: 'state';
  seq: number;
  t: number;
  pose: [number, number, number];
  cov_diag: number[];
  mode: string;
  stationary: boolean;
}

export interface EventMessage {
  type: 'event';
  name: string;
  t: number;
}

export interface FrameMessage {
  type: 'frame';
  seq: number;
  png_base64: string;
}

export interface ErrorMessage {
  type: 'error';
  code: string;
  detail: string;
}

export type ServerMessage =
  | AckMessage
  | StateMessage
  | EventMessage
  | FrameMessage
  | ErrorMessage;

export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new Error(`unparseable server message: ${raw.slice(0, 80)}`);
  }
  const msg = data as { type?: string };
  switch (msg.type) {
    case 'ack':
    case 'state':
    case 'event':
    case 'frame':
    case 'error':
      return data as ServerMessage;
    default:
      throw new Error(`unknown server message type: ${String(msg.type)}`);
  }
}

export function initMessage(config: SessionConfigWire): string {
  return JSON.stringify({ type: 'init', config });
}

export function pointerMessage(poses: PointerPoseWire[]): string {
  return JSON.stringify({ type: 'pointer', poses });
}

export function resetMessage(): string {
  return JSON.stringify({ type: 'reset' });
}

export function frameRequestMessage(): string {
  return JSON.stringify({ type: 'frame_request' });
}

/**
 * Guards the "never send non-monotonic timestamps" invariant: batches are
 * filtered so each emitted pose is strictly later than anything already
 * sent on the session.
 */
export class MonotonicClock {
  private last = -Infinity;

  filter(poses: PointerPoseWire[]): PointerPoseWire[] {
    const out: PointerPoseWire[] = [];
    for (const pose of poses) {
      if (pose.t > this.last) {
        out.push(pose);
        this.last = pose.t;
      }
    }
    return out;
  }
}
