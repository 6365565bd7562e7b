// Session transport: a thin wrapper over a WebSocket speaking the service
// protocol, usable from the browser (global WebSocket) and from node
// tests (the 'ws' package exposes the same handler properties).

import {
  AckMessage,
  FrameMessage,
  MonotonicClock,
  PointerPoseWire,
  ServerMessage,
  SessionConfigWire,
  StateMessage,
  frameRequestMessage,
  initMessage,
  parseServerMessage,
  pointerMessage,
  resetMessage,
} from './protocol';

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => WebSocketLike;

export interface SessionHandlers {
  onState?: (msg: StateMessage) => void;
  onEvent?: (name: string, t: number) => void;
  onFrame?: (msg: FrameMessage) => void;
  onError?: (code: string, detail: string) => void;
  onClose?: () => void;
}

export class WsSession {
  private ws: WebSocketLike | null = null;
  private clock = new MonotonicClock();
  private ackWaiter: ((ack: AckMessage) => void) | null = null;
  private frameWaiters: ((frame: FrameMessage) => void)[] = [];
  lastStateAt = 0; // ms epoch of the latest state message
  lastState: StateMessage | null = null;

  constructor(
    private url: string,
    private handlers: SessionHandlers = {},
    private socketFactory: SocketFactory = (u) =>
      new WebSocket(u) as unknown as WebSocketLike,
  ) {}

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const ws = this.socketFactory(this.url);
      ws.onopen = () => {
        this.ws = ws;
        resolve();
      };
      ws.onerror = (ev) => reject(new Error(`connection failed: ${String(ev)}`));
      ws.onclose = () => {
        this.ws = null;
        this.handlers.onClose?.();
      };
      ws.onmessage = (ev) => this.dispatch(String(ev.data));
    });
  }

  private dispatch(raw: string): void {
    let msg: ServerMessage;
    try {
      msg = parseServerMessage(raw);
    } catch (err) {
      this.handlers.onError?.('client_parse', String(err));
      return;
    }
    switch (msg.type) {
      case 'ack':
        this.ackWaiter?.(msg);
        this.ackWaiter = null;
        break;
      case 'state':
        this.lastState = msg;
        this.lastStateAt = Date.now();
        this.handlers.onState?.(msg);
        break;
      case 'event':
        this.handlers.onEvent?.(msg.name, msg.t);
        break;
      case 'frame': {
        const waiter = this.frameWaiters.shift();
        if (waiter) waiter(msg);
        else this.handlers.onFrame?.(msg);
        break;
      }
      case 'error':
        this.handlers.onError?.(msg.code, msg.detail);
        break;
    }
  }

  private require(): WebSocketLike {
    if (!this.ws) throw new Error('session not connected');
    return this.ws;
  }

  init(config: SessionConfigWire): Promise<AckMessage> {
    const ws = this.require();
    return new Promise((resolve) => {
      this.ackWaiter = resolve;
      ws.send(initMessage(config));
    });
  }

  sendPointerBatch(poses: PointerPoseWire[]): number {
    const filtered = this.clock.filter(poses);
    if (filtered.length > 0) this.require().send(pointerMessage(filtered));
    return filtered.length;
  }

  reset(): Promise<AckMessage> {
    const ws = this.require();
    this.clock = new MonotonicClock();
    return new Promise((resolve) => {
      this.ackWaiter = resolve;
      ws.send(resetMessage());
    });
  }

  requestFrame(): Promise<FrameMessage> {
    const ws = this.require();
    return new Promise((resolve) => {
      this.frameWaiters.push(resolve);
      ws.send(frameRequestMessage());
    });
  }

  /** True when no state has arrived for more than a second. */
  isStale(nowMs: number = Date.now()): boolean {
    return this.lastStateAt > 0 && nowMs - this.lastStateAt > 1000;
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }
}
