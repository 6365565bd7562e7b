import { describe, expect, it } from 'vitest';

import {
  MonotonicClock,
  initMessage,
  parseServerMessage,
  pointerMessage,
} from '../src/protocol';

describe('parseServerMessage', () => {
  it('round-trips known message types', () => {
    const state = {
      type: 'state', seq: 3, t: 1.25, pose: [10, -5, 0.1],
      cov_diag: [0, 0, 0, 0, 0, 0, 0, 0], mode: 'PLACED_TRACKING', stationary: true,
    };
    const parsed = parseServerMessage(JSON.stringify(state));
    expect(parsed).toEqual(state);
  });

  it('rejects unknown types and non-json', () => {
    expect(() => parseServerMessage('{"type": "mystery"}')).toThrow(/unknown/);
    expect(() => parseServerMessage('not json at all')).toThrow(/unparseable/);
  });
});

describe('messages', () => {
  it('init wraps the config', () => {
    const raw = JSON.parse(initMessage({ session_id: 'x', mode: 'live_pointer' }));
    expect(raw).toEqual({ type: 'init', config: { session_id: 'x', mode: 'live_pointer' } });
  });

  it('pointer batch keeps field names', () => {
    const raw = JSON.parse(pointerMessage([
      { t: 0.1, x_mm: 1, y_mm: 2, theta_rad: 0.3, contact: true, lifting: false },
    ]));
    expect(raw.type).toBe('pointer');
    expect(raw.poses[0]).toHaveProperty('x_mm', 1);
    expect(raw.poses[0]).toHaveProperty('theta_rad', 0.3);
  });
});

describe('MonotonicClock', () => {
  it('never lets timestamps go backwards', () => {
    const clock = new MonotonicClock();
    const mk = (t: number) => ({
      t, x_mm: 0, y_mm: 0, theta_rad: 0, contact: false, lifting: false,
    });
    expect(clock.filter([mk(0.1), mk(0.2)]).map((p) => p.t)).toEqual([0.1, 0.2]);
    // replays and stalls are dropped, later samples pass
    expect(clock.filter([mk(0.2), mk(0.15), mk(0.3)]).map((p) => p.t)).toEqual([0.3]);
    expect(clock.filter([mk(0.05)])).toEqual([]);
  });
});
