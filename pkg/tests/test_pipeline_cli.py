import sys
from pathlib import Path

import numpy as np
import pytest

from lidargrid.cli import EXIT_DATA, EXIT_MODEL, EXIT_OK, EXIT_USAGE, main
from lidargrid.grid import FREE, OCCUPIED, UNKNOWN, DiscreteMap, load_pgm, save_pgm
from lidargrid.pipeline import MappingPipeline, PipelineConfig
from lidargrid.pointcloud import PCD_BINARY, write_cloud
from lidargrid.synthetic import (Lidar3D, floorplan_square_room,
                                 simulate_sequence)

ECHO = f"{sys.executable} {Path(__file__).parent / 'ttog_echo.py'}"


def _write_scдуши(*a):  # placeholder guard against typos
    raise AssertionError


def _write_scans(scan_dir, n_scans=3, step=0.05):
    scan_dir.mkdir(parents=True, exist_ok=True)
    fp = floorplan_square_room(size_m=6.0)
    lidar = Lidar3D(n_azimuth=240, ring_elevations_deg=(-2.0, 0.0, 2.0),
                    max_range=10.0)
    traj = [(3.0 + step * k, 3.0, 0.0) for k in range(n_scans)]
    for k, cloud in enumerate(simulate_sequence(fp, traj, lidar)):
        write_cloud(cloud, scan_dir / f"scan_{k:04d}.pcd", PCD_BINARY)
    return scan_dir


def test_pipeline_two_scan_stationary():
    fp = floorplan_square_room(size_m=6.0)
    lidar = Lidar3D(n_azimuth=240, ring_elevations_deg=(-2.0, 0.0, 2.0),
                    max_range=10.0)
    clouds = simulate_sequence(fp, [(3.0, 3.0, 0.0)] * 2, lidar)
    pipe = MappingPipeline(PipelineConfig())
    for cloud in clouds:
        pipe.process_scan(cloud)
    assert len(pipe.trajectory) == 2
    poses = [p for _, p in pipe.trajectory]
    assert np.linalg.norm(poses[1].translation) < 1e-3
    assert pipe.grid.observed.any()


def test_cmd_map_writes_outputs(tmp_path):
    scans = _write_scans(tmp_path / "scans", n_scans=3)
    out = tmp_path / "out"
    code = main(["map", "--input", str(scans), "--output", str(out)])
    assert code == EXIT_OK
    assert (out / "map.pgm").exists()
    assert (out / "map.pgm.meta").exists()
    traj_lines = (out / "trajectory.txt").read_text().strip().splitlines()
    assert len(traj_lines) == 3
    dmap = load_pgm(out / "map.pgm")
    dmap.validate_discretized()
    assert (dmap.codes != UNKNOWN).any()


def test_cmd_map_single_scan_is_data_error(tmp_path, capsys):
    scans = _write_scans(tmp_path / "scans", n_scans=1)
    code = main(["map", "--input", str(scans), "--output", str(tmp_path / "o")])
    assert code == EXIT_DATA
    assert "at least 2 scans" in capsys.readouterr().err


def test_cmd_map_deterministic(tmp_path):
    scans = _write_scans(tmp_path / "scans", n_scans=4)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["map", "--input", str(scans), "--output", str(out_a),
                 "--seed", "7"]) == EXIT_OK
    assert main(["map", "--input", str(scans), "--output", str(out_b),
                 "--seed", "7"]) == EXIT_OK
    for name in ("map.pgm", "map.pgm.meta", "trajectory.txt"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_cmd_clean_identity_bitwise(tmp_path):
    rng = np.random.default_rng(11)
    codes = rng.choice([FREE, OCCUPIED, UNKNOWN], size=(64, 64)).astype(np.uint8)
    src = tmp_path / "in.pgm"
    save_pgm(DiscreteMap(codes, 0.05), src)
    dst = tmp_path / "out.pgm"
    code = main(["clean", "--map", str(src), "--cleaner", "identity",
                 "--output", str(dst)])
    assert code == EXIT_OK
    assert np.array_equal(load_pgm(dst).codes, codes)


def test_cmd_clean_morph_closes_gap(tmp_path):
    # three-cell-thick wall: floating-point removal trims the gap-facing
    # corners but keeps the middle-row endpoints, leaving a one-cell gap
    # for the morphological cleaner to close
    codes = np.full((40, 40), UNKNOWN, dtype=np.uint8)
    codes[19:22, 5:18] = OCCUPIED
    codes[19:22, 19:32] = OCCUPIED  # one-cell gap at column 18
    codes[24:32, 6:30] = FREE
    src = tmp_path / "in.pgm"
    save_pgm(DiscreteMap(codes, 0.05), src)
    dst = tmp_path / "out.pgm"
    assert main(["clean", "--map", str(src), "--cleaner", "morph",
                 "--output", str(dst)]) == EXIT_OK
    assert load_pgm(dst).codes[20, 18] == OCCUPIED


def test_cmd_clean_missing_model_no_partial_output(tmp_path, capsys):
    rng = np.random.default_rng(12)
    codes = rng.choice([FREE, OCCUPIED, UNKNOWN], size=(32, 32)).astype(np.uint8)
    src = tmp_path / "in.pgm"
    save_pgm(DiscreteMap(codes, 0.05), src)
    dst = tmp_path / "out.pgm"
    code = main(["clean", "--map", str(src),
                 "--cleaner", "model:/no/such/model_binary",
                 "--output", str(dst)])
    assert code == EXIT_MODEL
    assert not dst.exists()


def test_cmd_clean_subprocess_model(tmp_path):
    rng = np.random.default_rng(13)
    codes = rng.choice([FREE, OCCUPIED, UNKNOWN], size=(48, 48)).astype(np.uint8)
    src = tmp_path / "in.pgm"
    save_pgm(DiscreteMap(codes, 0.05), src)
    dst = tmp_path / "out.pgm"
    code = main(["clean", "--map", str(src),
                 "--cleaner", f"model:{ECHO} echo", "--output", str(dst)])
    assert code == EXIT_OK
    out = load_pgm(dst)
    out.validate_discretized()


def test_cmd_datagen_and_eval(tmp_path, capsys):
    fp_dir = tmp_path / "floorplans"
    out = tmp_path / "dataset"
    code = main(["datagen", "--floorplans", str(fp_dir), "--count", "3",
                 "--output", str(out), "--seed", "5", "--emit-builtin",
                 "--resolution", "0.1"])
    assert code == EXIT_OK
    pgms = sorted((out / "pairs").glob("*.pgm"))
    assert len(pgms) == 6
    manifest = (out / "manifest.csv").read_text().strip().splitlines()
    assert len(manifest) == 4

    capsys.readouterr()
    code = main(["eval", "--map", str(pgms[0]), "--truth", str(pgms[0])])
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    assert "unoccupied IoU: 1.0000" in printed
    assert "occupied IoU: 1.0000" in printed


def test_cmd_eval_missing_truth(tmp_path):
    rng = np.random.default_rng(14)
    codes = rng.choice([FREE, OCCUPIED], size=(16, 16)).astype(np.uint8)
    src = tmp_path / "m.pgm"
    save_pgm(DiscreteMap(codes, 0.05), src)
    code = main(["eval", "--map", str(src), "--truth", str(tmp_path / "no.pgm")])
    assert code == EXIT_DATA


def test_cmd_bench_synthetic(tmp_path, capsys):
    report = tmp_path / "report.csv"
    code = main(["bench", "--synthetic", "5", "--every-n", "5",
                 "--output", str(report)])
    assert code == EXIT_OK
    assert "per-scan total" in capsys.readouterr().out
    assert report.exists()


def test_usage_error_exit_code():
    assert main(["map"]) == EXIT_USAGE          # missing required args
    assert main(["unknown-subcommand"]) == EXIT_USAGE


def test_config_file_roundtrip(tmp_path):
    cfg_text = """
# pipeline configuration
cleaner = "morph"
every_n = 5
seed = 3

[preprocess]
box_half_width = 0.8
voxel_resolution = 0.2

[gicp]
knn = 12
max_correspondence_dist = 0.8

[filtration]
t1 = 0.1
t2 = 0.9
t3 = 0.95

[grid]
resolution = 0.1
clamp_hi = 3.0
"""
    path = tmp_path / "config.toml"
    path.write_text(cfg_text)
    cfg = PipelineConfig.from_file(path)
    assert cfg.cleaner == "morph" and cfg.every_n == 5 and cfg.seed == 3
    assert cfg.preprocess.box_half_width == 0.8
    assert cfg.gicp.knn == 12
    assert cfg.filtration.t2 == 0.9
    assert cfg.grid.resolution == 0.1 and cfg.grid.clamp_hi == 3.0


def test_config_rejects_bad_thresholds_before_processing(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[filtration]\nt1 = 0.9\nt2 = 0.5\n")
    with pytest.raises(ValueError):
        PipelineConfig.from_file(path)
    # through the CLI: usage of a bad config is a data error, input untouched
    code = main(["map", "--input", str(tmp_path), "--output",
                 str(tmp_path / "o"), "--config", str(path)])
    assert code == EXIT_DATA


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad2.toml"
    path.write_text("[gicp]\nknn = 5\nwarp_drive = 9\n")
    with pytest.raises(ValueError, match="warp_drive"):
        PipelineConfig.from_file(path)
