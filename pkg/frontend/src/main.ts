// Tabletop demonstrator: drag, pause, lift and place a virtual phone over
// a virtual desk while the tracking service estimates its pose from
// synthesized IMU data.  The phone screen shows the camouflage crop at the
// ESTIMATED pose, so estimator drift is directly visible as a misaligned
// "transparency" illusion.

import {
  DEFAULT_GEOMETRY,
  Geometry,
  MapImage,
  Pose,
  normalizeAngle,
  overlayWidget,
  renderCrop,
} from './cropRender';
import { covarianceEllipseMm, positionErrorMm } from './ellipse';
import { WsSession } from './net';
import { base64ToBytes, comparisonPoses, DecodedPng, runComparison } from './compare';
import { SessionConfigWire, StateMessage } from './protocol';

const POINTER_HZ = 40;
const HOLD_DURATION_S = 1.0; // mirrors the detector default for the ring

interface UiRefs {
  canvas: HTMLCanvasElement;
  status: HTMLElement;
  banner: HTMLElement;
  errorReadout: HTMLElement;
  connectBtn: HTMLButtonElement;
  placeBtn: HTMLButtonElement;
  compareBtn: HTMLButtonElement;
  widgetToggle: HTMLInputElement;
  magnetToggle: HTMLInputElement;
  zuptToggle: HTMLInputElement;
  noiseSlider: HTMLInputElement;
  noiseLabel: HTMLElement;
  urlInput: HTMLInputElement;
  mapSelect: HTMLSelectElement;
  geomSelect: HTMLSelectElement;
}

function refs(): UiRefs {
  const get = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
  return {
    canvas: get('table'),
    status: get('status'),
    banner: get('banner'),
    errorReadout: get('error-readout'),
    connectBtn: get('connect'),
    placeBtn: get('place'),
    compareBtn: get('compare'),
    widgetToggle: get('widget') as HTMLInputElement,
    magnetToggle: get('magnet') as HTMLInputElement,
    zuptToggle: get('zupt') as HTMLInputElement,
    noiseSlider: get('noise') as HTMLInputElement,
    noiseLabel: get('noise-label'),
    urlInput: get('url') as HTMLInputElement,
    mapSelect: get('map-kind') as HTMLSelectElement,
    geomSelect: get('geom') as HTMLSelectElement,
  };
}

const GEOMETRIES: Record<string, Geometry> = {
  phone: DEFAULT_GEOMETRY,
  compact: {
    bodyW: 60, bodyH: 120, screenOffsetX: 2, screenOffsetY: 4,
    screenW: 56, screenH: 112, screenPxW: 280, screenPxH: 560,
  },
};

function diceWidget(size = 64): { data: Uint8ClampedArray; w: number; h: number } {
  // a translucent rounded die face with three pips
  const data = new Uint8ClampedArray(size * size * 4);
  const pip = (cx: number, cy: number, x: number, y: number) =>
    Math.hypot(x - cx, y - cy) < size * 0.09;
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const o = (y * size + x) * 4;
      const inset = Math.min(x, y, size - 1 - x, size - 1 - y);
      if (inset < size * 0.04) continue; // transparent border
      const isPip =
        pip(size * 0.25, size * 0.25, x, y) ||
        pip(size * 0.5, size * 0.5, x, y) ||
        pip(size * 0.75, size * 0.75, x, y);
      data[o] = isPip ? 40 : 235;
      data[o + 1] = isPip ? 40 : 120;
      data[o + 2] = isPip ? 40 : 150;
      data[o + 3] = 210;
    }
  }
  return { data, w: size, h: size };
}

async function browserDecodePng(bytes: Uint8Array): Promise<DecodedPng> {
  const blob = new Blob([bytes.buffer as ArrayBuffer], { type: 'image/png' });
  const bitmap = await createImageBitmap(blob);
  const off = document.createElement('canvas');
  off.width = bitmap.width;
  off.height = bitmap.height;
  const ctx = off.getContext('2d')!;
  ctx.drawImage(bitmap, 0, 0);
  const img = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  return { data: img.data, width: img.width, height: img.height };
}

class TabletopApp {
  private ui = refs();
  private session: WsSession | null = null;
  private map: MapImage | null = null;
  private mapCanvas: HTMLCanvasElement | null = null;
  private geom: Geometry = DEFAULT_GEOMETRY;
  private truth: Pose = { xMm: 0, yMm: 0, theta: 0 };
  private placed = false;
  private lastState: StateMessage | null = null;
  private flashUntil = 0;
  private holdStillSince: number | null = null;
  private lastPointerMove = 0;
  private t0 = performance.now() / 1000;
  private timer: number | null = null;
  private cropCanvas = document.createElement('canvas');
  private widget = diceWidget();

  constructor() {
    this.bindUi();
    requestAnimationFrame(() => this.draw());
  }

  private now(): number {
    return performance.now() / 1000 - this.t0;
  }

  private bindUi(): void {
    const { canvas, connectBtn, placeBtn, compareBtn, noiseSlider, noiseLabel } = this.ui;
    connectBtn.addEventListener('click', () => void this.connect());
    placeBtn.addEventListener('click', () => this.togglePlaced());
    compareBtn.addEventListener('click', () => void this.compare());
    noiseSlider.addEventListener('input', () => {
      noiseLabel.textContent = `${Number(noiseSlider.value).toFixed(1)}x`;
    });
    canvas.addEventListener('pointermove', (ev) => this.onPointerMove(ev));
    canvas.addEventListener('dblclick', () => this.togglePlaced());
    canvas.addEventListener('wheel', (ev) => {
      ev.preventDefault();
      this.truth = {
        ...this.truth,
        theta: normalizeAngle(this.truth.theta + (ev.deltaY > 0 ? -0.08 : 0.08)),
      };
    });
    window.addEventListener('keydown', (ev) => {
      if (ev.key === 'q') this.truth.theta = normalizeAngle(this.truth.theta + 0.1);
      if (ev.key === 'e') this.truth.theta = normalizeAngle(this.truth.theta - 0.1);
      if (ev.key === ' ') {
        ev.preventDefault();
        this.togglePlaced();
      }
    });
  }

  private setStatus(text: string): void {
    this.ui.status.textContent = text;
  }

  private showBanner(text: string | null): void {
    this.ui.banner.textContent = text ?? '';
    this.ui.banner.style.display = text ? 'block' : 'none';
  }

  private sessionConfig(): SessionConfigWire {
    const noiseScale = Number(this.ui.noiseSlider.value);
    const mapKind = this.ui.mapSelect.value;
    const config: SessionConfigWire = {
      session_id: `tabletop-${Math.random().toString(36).slice(2, 10)}`,
      mode: 'live_pointer',
      rate: 200,
      decimation: 2,
      noise_scale: noiseScale,
      zupt_enabled: this.ui.zuptToggle.checked,
      map:
        mapKind === 'noise'
          ? { kind: 'noise', width_px: 1100, height_px: 800, cell_px: 24, amplitude: 46 }
          : { kind: 'checkerboard', width_px: 1100, height_px: 800, square_mm: 20 },
      magnet: this.ui.magnetToggle.checked
        ? {
            position_mm: [160, 110, 0],
            moment: [0, 0, 1],
            ambient_uT: [22, 5, -41],
            sensor_height_mm: 5,
          }
        : null,
    };
    const geom = GEOMETRIES[this.ui.geomSelect.value] ?? DEFAULT_GEOMETRY;
    this.geom = geom;
    config.geometry = {
      body_w: geom.bodyW,
      body_h: geom.bodyH,
      screen_offset_x: geom.screenOffsetX,
      screen_offset_y: geom.screenOffsetY,
      screen_w: geom.screenW,
      screen_h: geom.screenH,
      screen_px_w: geom.screenPxW,
      screen_px_h: geom.screenPxH,
    };
    return config;
  }

  private async connect(): Promise<void> {
    this.session?.close();
    if (this.timer !== null) window.clearInterval(this.timer);
    this.showBanner(null);
    const url = this.ui.urlInput.value;
    const session = new WsSession(url, {
      onState: (msg) => {
        this.lastState = msg;
      },
      onEvent: (name) => this.onEvent(name),
      onError: (code, detail) => this.showBanner(`server error ${code}: ${detail}`),
      onClose: () => {
        this.setStatus('disconnected');
        this.showBanner('connection closed; press Connect to retry');
      },
    });
    try {
      await session.connect();
    } catch (err) {
      this.showBanner(`cannot reach ${url}: ${String(err)} (is the service running?)`);
      return;
    }
    const ack = await session.init(this.sessionConfig());
    if (!ack.map || !ack.map_png_base64) {
      this.showBanner('service ack carried no map');
      return;
    }
    const decoded = await browserDecodePng(base64ToBytes(ack.map_png_base64));
    this.map = {
      data: decoded.data,
      width: decoded.width,
      height: decoded.height,
      mmPerPx: ack.map.mm_per_px,
    };
    const mapCanvas = document.createElement('canvas');
    mapCanvas.width = decoded.width;
    mapCanvas.height = decoded.height;
    mapCanvas
      .getContext('2d')!
      .putImageData(new ImageData(new Uint8ClampedArray(decoded.data), decoded.width), 0, 0);
    this.mapCanvas = mapCanvas;
    this.ui.canvas.width = decoded.width;
    this.ui.canvas.height = decoded.height;
    this.cropCanvas.width = this.geom.screenPxW;
    this.cropCanvas.height = this.geom.screenPxH;
    this.session = session;
    this.placed = false;
    this.t0 = performance.now() / 1000;
    this.setStatus(`session open (${ack.session_id ?? 'unnamed'})`);
    this.timer = window.setInterval(() => this.pushPointer(), 1000 / POINTER_HZ);
  }

  private onEvent(name: string): void {
    if (name === 'CAPTURE_TRIGGERED') this.flashUntil = performance.now() + 450;
    if (name === 'PLACED') this.setStatus('placed: tracking');
    if (name === 'LIFTED') this.setStatus('lifted: aloft');
  }

  private togglePlaced(): void {
    this.placed = !this.placed;
    this.ui.placeBtn.textContent = this.placed ? 'Lift' : 'Place';
  }

  private onPointerMove(ev: PointerEvent): void {
    if (!this.map) return;
    const rect = this.ui.canvas.getBoundingClientRect();
    const scaleX = this.ui.canvas.width / rect.width;
    const scaleY = this.ui.canvas.height / rect.height;
    const px = (ev.clientX - rect.left) * scaleX;
    const py = (ev.clientY - rect.top) * scaleY;
    const moved =
      Math.abs(px - this.lastPointerMove) > 0.5 || this.holdStillSince === null;
    this.truth = {
      xMm: (px - this.map.width / 2) * this.map.mmPerPx,
      yMm: (this.map.height / 2 - py) * this.map.mmPerPx,
      theta: this.truth.theta,
    };
    this.lastPointerMove = px;
    if (moved) this.holdStillSince = performance.now();
  }

  private pushPointer(): void {
    if (!this.session) return;
    this.session.sendPointerBatch([
      {
        t: this.now(),
        x_mm: this.truth.xMm,
        y_mm: this.truth.yMm,
        theta_rad: this.truth.theta,
        contact: this.placed,
        lifting: false,
      },
    ]);
  }

  private async compare(): Promise<void> {
    if (!this.session || !this.map) return;
    this.setStatus('running comparison mode…');
    if (this.timer !== null) window.clearInterval(this.timer);
    try {
      const reports = await runComparison(
        this.session, this.map, this.geom, browserDecodePng,
        comparisonPoses(20), this.now() + 1.0,
      );
      const worst = Math.max(...reports.map((r) => r.maxDiff));
      this.setStatus(
        `comparison: worst channel diff ${worst} over ${reports.length} poses ` +
        (worst <= 1 ? '(within ±1: OK)' : '(EXCEEDS ±1)'),
      );
    } finally {
      this.timer = window.setInterval(() => this.pushPointer(), 1000 / POINTER_HZ);
    }
  }

  private drawPhoneOutline(
    ctx: CanvasRenderingContext2D, pose: Pose, color: string, label: string,
  ): void {
    const map = this.map!;
    const px = pose.xMm / map.mmPerPx + map.width / 2;
    const py = map.height / 2 - pose.yMm / map.mmPerPx;
    ctx.save();
    ctx.translate(px, py);
    ctx.rotate(-pose.theta);
    const w = this.geom.bodyW / map.mmPerPx;
    const h = this.geom.bodyH / map.mmPerPx;
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.strokeRect(-w / 2, -h / 2, w, h);
    ctx.fillStyle = color;
    ctx.font = '12px sans-serif';
    ctx.fillText(label, -w / 2, -h / 2 - 4);
    ctx.restore();
  }

  private draw(): void {
    requestAnimationFrame(() => this.draw());
    const { canvas } = this.ui;
    const ctx = canvas.getContext('2d');
    if (!ctx) return;
    if (!this.map || !this.mapCanvas) {
      ctx.fillStyle = '#14161a';
      ctx.fillRect(0, 0, canvas.width, canvas.height);
      ctx.fillStyle = '#9aa3ad';
      ctx.font = '15px sans-serif';
      ctx.fillText('connect to the tracking service to begin', 24, 32);
      return;
    }
    const map = this.map;
    ctx.drawImage(this.mapCanvas, 0, 0);

    if (performance.now() < this.flashUntil) {
      ctx.fillStyle = 'rgba(255, 255, 230, 0.45)';
      ctx.fillRect(0, 0, canvas.width, canvas.height);
    }

    // camouflage crop at the ESTIMATED pose (poses_only delivery)
    const est = this.lastState;
    if (est && this.placed) {
      const estPose: Pose = { xMm: est.pose[0], yMm: est.pose[1], theta: est.pose[2] };
      const crop = renderCrop(estPose, this.geom, map);
      if (this.ui.widgetToggle.checked) {
        overlayWidget(
          crop, this.geom.screenPxW, this.widget.data, this.widget.w, this.widget.h,
          Math.floor((this.geom.screenPxW - this.widget.w) / 2),
          Math.floor((this.geom.screenPxH - this.widget.h) / 2),
        );
      }
      this.cropCanvas
        .getContext('2d')!
        .putImageData(new ImageData(crop, this.geom.screenPxW), 0, 0);
      const cx = estPose.xMm / map.mmPerPx + map.width / 2;
      const cy = map.height / 2 - estPose.yMm / map.mmPerPx;
      const screenCx = -this.geom.bodyW / 2 + this.geom.screenOffsetX + this.geom.screenW / 2;
      const screenCy = this.geom.bodyH / 2 - this.geom.screenOffsetY - this.geom.screenH / 2;
      ctx.save();
      ctx.translate(cx, cy);
      ctx.rotate(-estPose.theta);
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(
        this.cropCanvas,
        screenCx / map.mmPerPx - this.geom.screenW / map.mmPerPx / 2,
        -screenCy / map.mmPerPx - this.geom.screenH / map.mmPerPx / 2,
        this.geom.screenW / map.mmPerPx,
        this.geom.screenH / map.mmPerPx,
      );
      ctx.restore();

      // covariance ellipse around the estimate
      const ell = covarianceEllipseMm(est.cov_diag);
      ctx.strokeStyle = 'rgba(255, 170, 60, 0.9)';
      ctx.beginPath();
      ctx.ellipse(
        cx, cy, Math.max(2, ell.rx / map.mmPerPx), Math.max(2, ell.ry / map.mmPerPx),
        0, 0, 2 * Math.PI,
      );
      ctx.stroke();
      this.drawPhoneOutline(ctx, estPose, 'rgb(255, 170, 60)', 'estimate');

      const err = positionErrorMm(this.truth, estPose);
      this.ui.errorReadout.textContent = `${err.toFixed(2)} mm`;
      if (est.stationary) {
        ctx.fillStyle = '#76d7a8';
        ctx.font = '13px sans-serif';
        ctx.fillText('stationary (ZUPT active)', 12, canvas.height - 14);
      }
    }

    this.drawPhoneOutline(ctx, this.truth, 'rgb(90, 170, 255)', 'truth');

    // aloft hold-progress ring toward automatic capture
    if (!this.placed && this.holdStillSince !== null) {
      const held = (performance.now() - this.holdStillSince) / 1000;
      const frac = Math.min(1, held / HOLD_DURATION_S);
      const px = this.truth.xMm / map.mmPerPx + map.width / 2;
      const py = map.height / 2 - this.truth.yMm / map.mmPerPx;
      ctx.strokeStyle = frac >= 1 ? '#76d7a8' : '#e8e06a';
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.arc(px, py, 26, -Math.PI / 2, -Math.PI / 2 + 2 * Math.PI * frac);
      ctx.stroke();
    }

    if (this.session?.isStale()) {
      ctx.fillStyle = '#ff8080';
      ctx.font = '14px sans-serif';
      ctx.fillText('state stream stale (>1 s)', 12, 22);
    }
  }
}

new TabletopApp();
