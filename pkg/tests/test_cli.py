import json
import math

import numpy as np
import pytest
from PIL import Image

from deskglass.cli import main, parse_pose, read_estimates_csv
from deskglass.geometry import SurfaceMap, save_surface_map


def run_cli(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- pose parsing -----------------------------------------------------------

def test_parse_pose_degrees():
    p = parse_pose("10,20,90deg")
    assert (p.x, p.y) == (10.0, 20.0)
    assert p.theta == pytest.approx(math.pi / 2)


def test_parse_pose_radians_default():
    assert parse_pose("0,0,1.5").theta == pytest.approx(1.5)
    assert parse_pose("0,0,1.5rad").theta == pytest.approx(1.5)


def test_parse_pose_rejects_garbage():
    with pytest.raises(ValueError):
        parse_pose("1,2")


# --- simulate ---------------------------------------------------------------

def test_simulate_builtin_writes_three_files(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "simulate", "straight_line", str(tmp_path / "run"))
    assert code == 0
    info = json.loads(out)
    for key in ("trace", "truth", "map"):
        assert (tmp_path / json.loads(out)[key].split("/")[-1]).exists()
    assert (tmp_path / "run.map.json").exists()
    assert info["samples"] > 0


def test_simulate_deterministic_for_fixed_seed(tmp_path, capsys):
    run_cli(capsys, "simulate", "straight_line", str(tmp_path / "a"), "--seed", "7")
    run_cli(capsys, "simulate", "straight_line", str(tmp_path / "b"), "--seed", "7")
    assert (tmp_path / "a.trace.jsonl").read_bytes() == (tmp_path / "b.trace.jsonl").read_bytes()
    assert (tmp_path / "a.truth.jsonl").read_bytes() == (tmp_path / "b.truth.jsonl").read_bytes()
    assert (tmp_path / "a.map.png").read_bytes() == (tmp_path / "b.map.png").read_bytes()


def test_simulate_seed_changes_trace_not_truth(tmp_path, capsys):
    run_cli(capsys, "simulate", "straight_line", str(tmp_path / "a"), "--seed", "1")
    run_cli(capsys, "simulate", "straight_line", str(tmp_path / "b"), "--seed", "2")
    assert (tmp_path / "a.trace.jsonl").read_bytes() != (tmp_path / "b.trace.jsonl").read_bytes()
    assert (tmp_path / "a.truth.jsonl").read_bytes() == (tmp_path / "b.truth.jsonl").read_bytes()


def test_simulate_missing_segments_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"rate": 100}))
    code, _, err = run_cli(capsys, "simulate", str(bad), str(tmp_path / "x"))
    assert code == 2
    assert "segments" in err


def test_simulate_unknown_scenario_exits_2(tmp_path, capsys):
    code, _, err = run_cli(capsys, "simulate", "warp_loop", str(tmp_path / "x"))
    assert code == 2


# --- replay -----------------------------------------------------------------

@pytest.fixture(scope="module")
def straight_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    scenario = {
        "rate": 500.0,
        "noise_scale": 0.0,
        "segments": [
            {"kind": "hold_aloft", "duration": 1.2},
            {"kind": "lower_and_place", "duration": 0.3},
            {"kind": "pause", "duration": 0.5},
            {"kind": "move_to", "duration": 0.6, "target": [120.0, 0.0, 0.0]},
            {"kind": "pause", "duration": 0.6},
        ],
    }
    spath = tmp / "scenario.json"
    spath.write_text(json.dumps(scenario))
    assert main(["simulate", str(spath), str(tmp / "run")]) == 0
    return tmp


def test_replay_reports_submillimeter(straight_run, capsys, tmp_path):
    code, out, _ = run_cli(
        capsys, "replay", str(straight_run / "run.trace.jsonl"),
        "--map", str(straight_run / "run.map.png"),
        "--out", str(tmp_path / "replay"),
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["metrics"]["rmse_pos"] < 1.0
    assert summary["metrics"]["rmse_heading"] < 1e-3
    est = read_estimates_csv(tmp_path / "replay.estimates.csv")
    assert len(est) == summary["tracked"]


def test_replay_without_truth_gives_null_metrics(straight_run, capsys, tmp_path):
    trace_only = tmp_path / "only.trace.jsonl"
    trace_only.write_bytes((straight_run / "run.trace.jsonl").read_bytes())
    code, out, _ = run_cli(capsys, "replay", str(trace_only))
    assert code == 0
    assert json.loads(out)["metrics"] is None


def test_replay_truncated_line_exits_2(straight_run, capsys, tmp_path):
    lines = (straight_run / "run.trace.jsonl").read_text().splitlines()
    broken = tmp_path / "broken.trace.jsonl"
    broken.write_text("\n".join(lines[:10]) + '\n{"t": 0.5, "acc": [')
    code, _, err = run_cli(capsys, "replay", str(broken))
    assert code == 2
    assert "line 11" in err


def test_replay_no_zupt_flag(straight_run, capsys, tmp_path):
    code, out, _ = run_cli(
        capsys, "replay", str(straight_run / "run.trace.jsonl"), "--no-zupt")
    assert code == 0
    assert json.loads(out)["metrics"]["rmse_pos"] < 1.0  # noise-free either way


# --- render -----------------------------------------------------------------

@pytest.fixture()
def unit_map(tmp_path):
    img = np.random.default_rng(4).integers(0, 256, (100, 100, 3), dtype=np.uint8)
    save_surface_map(SurfaceMap(image=img, mm_per_px=1.0), tmp_path / "map.png")
    geom = {
        "body_w": 20.0, "body_h": 10.0, "screen_offset_x": 0.0, "screen_offset_y": 0.0,
        "screen_w": 20.0, "screen_h": 10.0, "screen_px_w": 20, "screen_px_h": 10,
    }
    (tmp_path / "geom.json").write_text(json.dumps(geom))
    return tmp_path, img


def test_render_identity_is_central_crop(unit_map, capsys):
    tmp, img = unit_map
    code, out, _ = run_cli(
        capsys, "render", str(tmp / "map.png"), str(tmp / "out.png"),
        "--pose", "0,0,0", "--geometry", str(tmp / "geom.json"),
        "--sampling", "nearest",
    )
    assert code == 0
    rendered = np.asarray(Image.open(tmp / "out.png").convert("RGB"))
    np.testing.assert_array_equal(rendered, img[45:55, 40:60])


def test_render_pose_degrees_rotates(unit_map, capsys):
    tmp, img = unit_map
    code, _, _ = run_cli(
        capsys, "render", str(tmp / "map.png"), str(tmp / "rot.png"),
        "--pose", "0,0,180deg", "--geometry", str(tmp / "geom.json"),
        "--sampling", "nearest",
    )
    assert code == 0
    rendered = np.asarray(Image.open(tmp / "rot.png").convert("RGB"))
    np.testing.assert_array_equal(rendered, img[45:55, 40:60][::-1, ::-1])


def test_render_missing_map_exits_2(tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "render", str(tmp_path / "nope.png"), str(tmp_path / "o.png"),
        "--pose", "0,0,0")
    assert code == 2


def test_render_bad_pose_exits_2(unit_map, capsys):
    tmp, _ = unit_map
    code, _, err = run_cli(
        capsys, "render", str(tmp / "map.png"), str(tmp / "o.png"), "--pose", "1,2")
    assert code == 2


# --- eval -------------------------------------------------------------------

def test_eval_matches_replay_metrics(straight_run, capsys, tmp_path):
    code, out, _ = run_cli(
        capsys, "replay", str(straight_run / "run.trace.jsonl"),
        "--out", str(tmp_path / "r"))
    replay_metrics = json.loads(out)["metrics"]
    code, out, _ = run_cli(
        capsys, "eval", str(straight_run / "run.truth.jsonl"),
        str(tmp_path / "r.estimates.csv"))
    assert code == 0
    metrics = json.loads(out)
    assert metrics == pytest.approx(replay_metrics)


def test_eval_timestamp_mismatch_exits_2(straight_run, capsys, tmp_path):
    est = tmp_path / "fake.csv"
    est.write_text(
        "t,p_x,p_y,theta,v_x,v_y,b_ax,b_ay,b_gz,cov_trace\n"
        "123.456,0,0,0,0,0,0,0,0,0\n"
    )
    code, _, err = run_cli(capsys, "eval", str(straight_run / "run.truth.jsonl"), str(est))
    assert code == 2


# --- pattern helpers --------------------------------------------------------

def test_pattern_request_and_tile(tmp_path, capsys):
    img = np.zeros((32, 32, 3), dtype=np.uint8)
    img[:, 16:] = (200, 40, 40)
    Image.fromarray(img).save(tmp_path / "env.png")
    code, out, _ = run_cli(
        capsys, "pattern-request", str(tmp_path / "env.png"),
        "--sample", "190,45,45", "--grid", "2")
    assert code == 0
    request = json.loads(out)
    assert len(request["candidate_regions"]) == 4

    response = {
        "chosen_region_id": 1,
        "tile_spec": {"base_rgb": [200, 40, 40],
                      "variation_rgb_amplitude": [6, 6, 6], "tile_px": 64},
    }
    (tmp_path / "resp.json").write_text(json.dumps(response))
    code, out, _ = run_cli(
        capsys, "pattern-tile", str(tmp_path / "resp.json"), str(tmp_path / "tile.png"),
        "--seed", "3")
    assert code == 0
    tile = np.asarray(Image.open(tmp_path / "tile.png").convert("RGB"))
    assert tile.shape == (64, 64, 3)
    np.testing.assert_allclose(tile.reshape(-1, 3).mean(axis=0), [200, 40, 40], atol=2)
