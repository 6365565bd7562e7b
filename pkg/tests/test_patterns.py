import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from deskglass.patterns import (
    ColorSample,
    HttpProvider,
    OfflineProvider,
    PatternResponse,
    Region,
    TileSpec,
    build_request,
    match_region,
    request_pattern,
    segment_regions,
    synthesize_tile,
)


def _solid(w, h, color):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:] = color
    return img


# --- segment_regions --------------------------------------------------------

def test_segment_constant_image():
    regions = segment_regions(_solid(64, 64, (255, 0, 0)), grid=2)
    assert len(regions) == 4
    assert all(r.mean_rgb == (255, 0, 0) for r in regions)
    assert [r.region_id for r in regions] == [0, 1, 2, 3]


def test_segment_half_and_half():
    img = _solid(64, 64, (0, 0, 0))
    img[:, 32:] = 255
    regions = segment_regions(img, grid=2)
    means = [r.mean_rgb for r in regions]
    assert means == [(0, 0, 0), (255, 255, 255), (0, 0, 0), (255, 255, 255)]


def test_segment_single_region_is_global_mean():
    img = _solid(10, 10, (0, 0, 0))
    img[:5] = 100
    regions = segment_regions(img, grid=1)
    assert len(regions) == 1
    assert regions[0].mean_rgb == (50, 50, 50)
    assert regions[0].bounds == (0, 0, 10, 10)


def test_segment_rejects_empty():
    with pytest.raises(ValueError):
        segment_regions(np.zeros((0, 0, 3), dtype=np.uint8), grid=2)


# --- match_region -----------------------------------------------------------

REGIONS = [
    Region(0, (250, 10, 10), (0, 0, 8, 8)),
    Region(1, (255, 255, 255), (8, 0, 8, 8)),
    Region(2, (0, 0, 0), (0, 8, 8, 8)),
]


def test_match_nearest_color():
    assert match_region(ColorSample((250, 10, 10)), REGIONS) == 0


def test_match_tie_breaks_low_id():
    regions = [Region(3, (100, 0, 0), (0, 0, 4, 4)), Region(1, (0, 100, 0), (4, 0, 4, 4))]
    # sample equidistant from both candidates
    assert match_region(ColorSample((50, 50, 0)), regions) == 1


def test_match_applies_illumination_gain():
    regions = [Region(0, (64, 64, 64), (0, 0, 4, 4)), Region(1, (128, 128, 128), (4, 0, 4, 4))]
    assert match_region(ColorSample((128, 128, 128), illumination_gain=2.0), regions) == 0


def test_match_scale_consistent():
    rng = np.random.default_rng(8)
    for _ in range(50):
        means = rng.integers(0, 200, size=(5, 3))
        regions = [Region(i, tuple(int(v) for v in m), (0, 0, 1, 1)) for i, m in enumerate(means)]
        sample_rgb = tuple(int(v) for v in rng.integers(0, 200, 3))
        base_choice = match_region(ColorSample(sample_rgb), regions)
        gain = 1.3
        scaled_regions = [
            Region(r.region_id, tuple(v * gain for v in r.mean_rgb), r.bounds) for r in regions
        ]
        scaled_sample = ColorSample(tuple(v * gain for v in sample_rgb))
        assert match_region(scaled_sample, scaled_regions) == base_choice


def test_gain_out_of_range_rejected():
    with pytest.raises(ValueError):
        ColorSample((1, 2, 3), illumination_gain=0.01)


# --- synthesize_tile --------------------------------------------------------

def _response(base=(100, 120, 140), amp=(8.0, 8.0, 8.0), tile_px=128):
    return PatternResponse(0, TileSpec(base, amp, tile_px))


def test_tile_zero_amplitude_constant():
    tile = synthesize_tile(_response(amp=(0.0, 0.0, 0.0)), seed=3)
    assert np.all(tile.reshape(-1, 3) == np.array([100, 120, 140], dtype=np.uint8))


def test_tile_deterministic():
    a = synthesize_tile(_response(), seed=11)
    b = synthesize_tile(_response(), seed=11)
    np.testing.assert_array_equal(a, b)
    c = synthesize_tile(_response(), seed=12)
    assert not np.array_equal(a, c)


def test_tile_mean_near_base():
    tile = synthesize_tile(_response(amp=(32.0, 32.0, 32.0)), seed=5)
    mean = tile.reshape(-1, 3).mean(axis=0)
    np.testing.assert_allclose(mean, [100, 120, 140], atol=2.0)


def test_tile_amplitude_32_std_in_range():
    tile = synthesize_tile(_response(amp=(32.0, 32.0, 32.0), tile_px=128), seed=5)
    stds = tile.reshape(-1, 3).astype(float).std(axis=0)
    assert np.all(stds >= 4.0) and np.all(stds <= 32.0)


def test_tile_amplitude_validation():
    with pytest.raises(ValueError):
        synthesize_tile(_response(amp=(100.0, 0.0, 0.0)), seed=0)


# --- request_pattern --------------------------------------------------------

def test_offline_provider_picks_nearest():
    request = build_request(ColorSample((250, 10, 10)), REGIONS)
    result = request_pattern(OfflineProvider(), request)
    assert result.source == "provider"
    assert result.flag is None
    assert result.response.chosen_region_id == 0
    assert result.response.tile_spec.base_rgb == (250, 10, 10)


class _StubProvider:
    def __init__(self, payload=None, exc=None):
        self.payload = payload
        self.exc = exc
        self.calls = 0

    def fetch(self, request_json):
        self.calls += 1
        if self.exc is not None:
            raise self.exc
        return self.payload


def test_unknown_region_id_falls_back():
    request = build_request(ColorSample((250, 10, 10)), REGIONS)
    provider = _StubProvider(payload={
        "chosen_region_id": 99,
        "tile_spec": {"base_rgb": [1, 2, 3], "variation_rgb_amplitude": [4, 4, 4], "tile_px": 64},
    })
    result = request_pattern(provider, request)
    assert result.source == "fallback"
    assert "invalid_response" in result.flag
    assert result.response.chosen_region_id == 0  # offline choice
    tile = synthesize_tile(result.response, seed=0)
    assert tile.shape == (128, 128, 3)


def test_timeout_falls_back_with_flag():
    request = build_request(ColorSample((5, 5, 5)), REGIONS)
    provider = _StubProvider(exc=TimeoutError("no answer in 2 s"))
    result = request_pattern(provider, request)
    assert provider.calls == 2  # one retry
    assert result.source == "fallback"
    assert "TimeoutError" in result.flag
    assert result.response.chosen_region_id == 2


def test_garbage_amplitude_falls_back():
    request = build_request(ColorSample((250, 10, 10)), REGIONS)
    provider = _StubProvider(payload={
        "chosen_region_id": 1,
        "tile_spec": {"base_rgb": [255, 255, 255], "variation_rgb_amplitude": [500, 0, 0]},
    })
    result = request_pattern(provider, request)
    assert result.source == "fallback"
    tile = synthesize_tile(result.response, seed=1)
    assert tile.dtype == np.uint8


def test_pipeline_deterministic_end_to_end():
    img = np.random.default_rng(2).integers(0, 256, (64, 64, 3), dtype=np.uint8)

    def run():
        regions = segment_regions(img, grid=8)
        request = build_request(ColorSample((90, 80, 70), illumination_gain=1.1), regions)
        result = request_pattern(OfflineProvider(), request)
        return synthesize_tile(result.response, seed=77)

    np.testing.assert_array_equal(run(), run())


# --- live HTTP provider -----------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        request = json.loads(self.rfile.read(length))
        # echo back the last candidate with a custom tile spec
        chosen = request["candidate_regions"][-1]["region_id"]
        body = json.dumps({
            "chosen_region_id": chosen,
            "tile_spec": {"base_rgb": [10, 20, 30], "variation_rgb_amplitude": [2, 2, 2],
                          "tile_px": 32},
        }).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def http_endpoint():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/pattern"
    server.shutdown()


def test_http_provider_round_trip(http_endpoint):
    request = build_request(ColorSample((250, 10, 10)), REGIONS)
    result = request_pattern(HttpProvider(http_endpoint, timeout_s=2.0), request)
    assert result.source == "provider"
    assert result.response.chosen_region_id == 2
    assert result.response.tile_spec.base_rgb == (10, 20, 30)
    tile = synthesize_tile(result.response, seed=0)
    assert tile.shape == (32, 32, 3)


def test_http_provider_unreachable_falls_back():
    request = build_request(ColorSample((250, 10, 10)), REGIONS)
    result = request_pattern(HttpProvider("http://127.0.0.1:1/nope", timeout_s=0.2), request)
    assert result.source == "fallback"
    assert result.response.chosen_region_id == 0
