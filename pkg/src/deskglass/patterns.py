"""Surface-color matching and fill-texture synthesis.

A point color sample is matched against grid regions of a larger
environment photo, and the chosen region seeds a tile of base color plus
seeded value noise.  Region choice can be delegated to an external
provider speaking a small JSON protocol; any provider failure (timeout,
garbage, unknown region ids) falls back to the deterministic offline
matcher, so the output tile is always valid.
"""

import json
import urllib.request
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import rng

DEFAULT_GRID = 8
DEFAULT_TILE_PX = 128
DEFAULT_AMPLITUDE = (8.0, 8.0, 8.0)
MAX_AMPLITUDE = 64.0
PROVIDER_TIMEOUT_S = 2.0


class ProviderError(ValueError):
    pass


@dataclass(frozen=True)
class ColorSample:
    """Point sample of the surface color with an illumination estimate."""

    rgb: tuple
    illumination_gain: float = 1.0

    def __post_init__(self):
        if not 0.1 <= self.illumination_gain <= 10.0:
            raise ValueError("illumination_gain must lie in [0.1, 10]")

    def corrected(self) -> np.ndarray:
        return np.asarray(self.rgb, dtype=float) / self.illumination_gain


@dataclass(frozen=True)
class Region:
    region_id: int
    mean_rgb: tuple
    bounds: tuple  # (x0, y0, w, h) pixels


@dataclass(frozen=True)
class TileSpec:
    base_rgb: tuple
    variation_rgb_amplitude: tuple = DEFAULT_AMPLITUDE
    tile_px: int = DEFAULT_TILE_PX


@dataclass(frozen=True)
class PatternRequest:
    sampled_rgb: tuple
    candidate_regions: tuple

    def to_json(self) -> dict:
        return {
            "sampled_rgb": list(self.sampled_rgb),
            "candidate_regions": [
                {
                    "region_id": r.region_id,
                    "mean_rgb": list(r.mean_rgb),
                    "w_px": r.bounds[2],
                    "h_px": r.bounds[3],
                }
                for r in self.candidate_regions
            ],
        }


@dataclass(frozen=True)
class PatternResponse:
    chosen_region_id: int
    tile_spec: TileSpec

    def to_json(self) -> dict:
        return {
            "chosen_region_id": self.chosen_region_id,
            "tile_spec": {
                "base_rgb": list(self.tile_spec.base_rgb),
                "variation_rgb_amplitude": list(self.tile_spec.variation_rgb_amplitude),
                "tile_px": self.tile_spec.tile_px,
            },
        }


def segment_regions(environment: np.ndarray, grid: int) -> List[Region]:
    """Partition an RGB image into a grid x grid mosaic of mean colors."""
    img = np.asarray(environment)
    if img.size == 0 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("environment must be a non-empty HxWx3 image")
    if grid < 1:
        raise ValueError("grid must be >= 1")
    h, w = img.shape[:2]
    ys = np.linspace(0, h, grid + 1).astype(int)
    xs = np.linspace(0, w, grid + 1).astype(int)
    regions = []
    rid = 0
    for gy in range(grid):
        for gx in range(grid):
            cell = img[ys[gy]:ys[gy + 1], xs[gx]:xs[gx + 1]].astype(float)
            mean = np.floor(cell.reshape(-1, 3).mean(axis=0) + 0.5).astype(int)
            regions.append(Region(
                region_id=rid,
                mean_rgb=tuple(int(v) for v in mean),
                bounds=(int(xs[gx]), int(ys[gy]), int(xs[gx + 1] - xs[gx]), int(ys[gy + 1] - ys[gy])),
            ))
            rid += 1
    return regions


def match_region(sample: ColorSample, regions: List[Region]) -> int:
    """Nearest region by Euclidean RGB distance to the gain-corrected
    sample; ties break to the lowest region_id."""
    if not regions:
        raise ValueError("regions must be non-empty")
    target = sample.corrected()
    best_id = None
    best_d = None
    for r in sorted(regions, key=lambda r: r.region_id):
        d = float(np.sum((np.asarray(r.mean_rgb, dtype=float) - target) ** 2))
        if best_d is None or d < best_d:
            best_d = d
            best_id = r.region_id
    return best_id


def synthesize_tile(response: PatternResponse, seed: int) -> np.ndarray:
    """Base color plus seeded value noise; deterministic in (response, seed)."""
    spec = response.tile_spec
    size = int(spec.tile_px)
    if size < 1:
        raise ValueError("tile_px must be >= 1")
    amp = np.asarray(spec.variation_rgb_amplitude, dtype=float)
    if np.any(amp < 0) or np.any(amp > MAX_AMPLITUDE):
        raise ValueError(f"amplitudes must lie in [0, {MAX_AMPLITUDE}]")
    base = np.asarray(spec.base_rgb, dtype=float)
    cell = 16
    gw = size // cell + 2
    tile_seed = (int(seed) * 1000003 + response.chosen_region_id) & 0xFFFFFFFFFFFFFFFF
    counters = np.arange(gw * gw * 3, dtype=np.uint64)
    lattice = (rng.uniform(tile_seed, counters).reshape(gw, gw, 3) * 2.0 - 1.0) * amp
    coords = np.arange(size) / cell
    i0 = coords.astype(np.int64)
    frac = coords - i0
    fy = frac[:, None, None]
    fx = frac[None, :, None]
    tl = lattice[i0][:, i0]
    tr = lattice[i0][:, i0 + 1]
    bl = lattice[i0 + 1][:, i0]
    br = lattice[i0 + 1][:, i0 + 1]
    noise = (tl * (1 - fx) + tr * fx) * (1 - fy) + (bl * (1 - fx) + br * fx) * fy
    # center the realized field so the tile mean sits on base_rgb
    noise -= noise.reshape(-1, 3).mean(axis=0)
    return np.clip(np.floor(base + noise + 0.5), 0, 255).astype(np.uint8)


def build_request(sample: ColorSample, regions: List[Region]) -> PatternRequest:
    """Wire request with the gain-corrected sample color."""
    corrected = np.clip(np.floor(sample.corrected() + 0.5), 0, 255).astype(int)
    return PatternRequest(
        sampled_rgb=tuple(int(v) for v in corrected),
        candidate_regions=tuple(regions),
    )


@dataclass(frozen=True)
class PatternResult:
    response: PatternResponse
    source: str                  # "provider" or "fallback"
    flag: Optional[str] = None   # why the fallback was used


class OfflineProvider:
    """Deterministic local matcher: nearest mean color, default tile spec."""

    def fetch(self, request_json: dict) -> dict:
        sampled = np.asarray(request_json["sampled_rgb"], dtype=float)
        best = None
        best_d = None
        for cand in request_json["candidate_regions"]:
            d = float(np.sum((np.asarray(cand["mean_rgb"], dtype=float) - sampled) ** 2))
            if best_d is None or d < best_d:
                best_d = d
                best = cand
        return {
            "chosen_region_id": best["region_id"],
            "tile_spec": {
                "base_rgb": list(best["mean_rgb"]),
                "variation_rgb_amplitude": list(DEFAULT_AMPLITUDE),
                "tile_px": DEFAULT_TILE_PX,
            },
        }


class HttpProvider:
    """POSTs the request JSON to an external endpoint."""

    def __init__(self, endpoint: str, timeout_s: float = PROVIDER_TIMEOUT_S):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def fetch(self, request_json: dict) -> dict:
        body = json.dumps(request_json).encode()
        req = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
            return json.loads(resp.read().decode())


def _validate_response(raw: dict, request: PatternRequest) -> PatternResponse:
    try:
        rid = int(raw["chosen_region_id"])
        spec = raw["tile_spec"]
        base = tuple(int(v) for v in spec["base_rgb"])
        amp = tuple(float(v) for v in spec.get("variation_rgb_amplitude", DEFAULT_AMPLITUDE))
        tile_px = int(spec.get("tile_px", DEFAULT_TILE_PX))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProviderError(f"malformed provider response: {exc}") from exc
    if rid not in {r.region_id for r in request.candidate_regions}:
        raise ProviderError(f"chosen_region_id {rid} is not a candidate")
    if len(base) != 3 or any(not 0 <= v <= 255 for v in base):
        raise ProviderError("base_rgb out of range")
    if len(amp) != 3 or any(not 0 <= v <= MAX_AMPLITUDE for v in amp):
        raise ProviderError("variation amplitude out of range")
    if tile_px < 1 or tile_px > 4096:
        raise ProviderError("tile_px out of range")
    return PatternResponse(chosen_region_id=rid, tile_spec=TileSpec(base, amp, tile_px))


def request_pattern(provider, request: PatternRequest, retries: int = 1) -> PatternResult:
    """Query a provider with validation, one retry, and offline fallback."""
    flag = None
    if provider is not None and not isinstance(provider, OfflineProvider):
        for _ in range(retries + 1):
            try:
                raw = provider.fetch(request.to_json())
                return PatternResult(_validate_response(raw, request), "provider")
            except ProviderError as exc:
                flag = f"invalid_response: {exc}"
            except Exception as exc:  # timeouts, connection errors, garbage
                flag = f"provider_error: {type(exc).__name__}"
    offline_raw = OfflineProvider().fetch(request.to_json())
    response = _validate_response(offline_raw, request)
    source = "fallback" if flag is not None else "provider"
    if provider is None or isinstance(provider, OfflineProvider):
        source = "provider"
    return PatternResult(response, source, flag)
