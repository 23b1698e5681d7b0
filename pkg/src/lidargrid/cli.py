"""Command-line entry points: map, clean, datagen, eval, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MODEL = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lidargrid",
        description="2D occupancy grid mapping from 3D LiDAR scans")
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("map", help="run the mapping pipeline over a scan directory")
    p_map.add_argument("--input", required=True, help="directory of .pcd/.csv scans")
    p_map.add_argument("--output", required=True, help="output directory")
    p_map.add_argument("--config", help="TOML-style config file")
    p_map.add_argument("--seed", type=int, default=0)
    p_map.add_argument("--cleaner", default=None,
                       help="identity | morph | model:<path-or-command>")
    p_map.add_argument("--every-n", type=int, default=None,
                       help="clean every N scans")
    p_map.add_argument("--intensity-scale", default="auto",
                       help="'auto' or a positive divisor for raw intensities")

    p_clean = sub.add_parser("clean", help="clean a saved map offline")
    p_clean.add_argument("--map", required=True, dest="map_path")
    p_clean.add_argument("--cleaner", default="morph")
    p_clean.add_argument("--output", required=True)

    p_gen = sub.add_parser("datagen", help="generate (erroneous, clean) map pairs")
    p_gen.add_argument("--floorplans", required=True,
                       help="directory of single-channel PNG/PGM floorplans")
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--output", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--resolution", type=float, default=0.05)
    p_gen.add_argument("--emit-builtin", action="store_true",
                       help="write the built-in fixture floorplans into "
                            "--floorplans first")

    p_eval = sub.add_parser("eval", help="IoU of a map against ground truth")
    p_eval.add_argument("--map", required=True, dest="map_path")
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--align", default="0,0,0,1",
                        help="tx,ty,yaw_deg,scale taking truth into the map frame")
    p_eval.add_argument("--classes", default="unoccupied,occupied")
    p_eval.add_argument("--report", help="also write a CSV report here")

    p_bench = sub.add_parser("bench", help="per-stage latency over a scan sequence")
    group = p_bench.add_mutually_exclusive_group(required=True)
    group.add_argument("--input", help="directory of scans")
    group.add_argument("--synthetic", type=int, metavar="N",
                       help="benchmark on N simulated scans instead")
    p_bench.add_argument("--config", help="TOML-style config file")
    p_bench.add_argument("--cleaner", default=None)
    p_bench.add_argument("--every-n", type=int, default=None)
    p_bench.add_argument("--output", help="write the CSV report here")
    return parser


def _load_config(args):
    from .pipeline import PipelineConfig

    config = PipelineConfig.from_file(args.config) if getattr(args, "config", None) \
        else PipelineConfig()
    if getattr(args, "cleaner", None):
        config.cleaner = args.cleaner
    if getattr(args, "every_n", None):
        config.every_n = args.every_n
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _scan_paths(input_dir):
    paths = sorted(p for p in Path(input_dir).iterdir()
                   if p.suffix.lower() in (".pcd", ".csv"))
    if len(paths) < 2:
        raise ValueError(f"need at least 2 scans in {input_dir}, found {len(paths)}")
    return paths


def cmd_map(args):
    from .pipeline import MappingPipeline
    from .pointcloud import load_cloud

    config = _load_config(args)
    paths = _scan_paths(args.input)
    scale = args.intensity_scale
    if scale != "auto":
        scale = float(scale)
    pipe = MappingPipeline(config)
    for k, path in enumerate(paths):
        cloud = load_cloud(path, intensity_scale=scale, scan_index=k)
        try:
            pipe.process_scan(cloud)
        except Exception as e:
            raise RuntimeError(f"scan {k} ({path.name}): {e}") from e
    out = pipe.finalize(args.output)
    print(f"map written to {out} ({len(paths)} scans, "
          f"{len(pipe.keyframes)} keyframes)")
    return EXIT_OK


def cmd_clean(args):
    from .cleaner import clean_map, make_cleaner
    from .grid import load_pgm, remove_floating_points, save_pgm

    dmap = load_pgm(args.map_path)
    cleaner = make_cleaner(args.cleaner)  # fail before touching outputs
    if args.cleaner not in ("identity", "none"):
        dmap = remove_floating_points(dmap, dmap.thresholds)
    cleaned = clean_map(dmap, cleaner, dmap.thresholds)
    save_pgm(cleaned, args.output)
    print(f"cleaned map written to {args.output}")
    return EXIT_OK


def cmd_datagen(args):
    from .datagen import generate_dataset

    fp_dir = Path(args.floorplans)
    if args.emit_builtin:
        from .grid import DiscreteMap, save_pgm
        from .synthetic import BUILTIN_FLOORPLANS

        fp_dir.mkdir(parents=True, exist_ok=True)
        for name, factory in BUILTIN_FLOORPLANS.items():
            fp = factory() if name != "tiny" else factory(variant=1)
            codes = np.where(fp.occupied, 0, 255).astype(np.uint8)
            save_pgm(DiscreteMap(codes, fp.resolution), fp_dir / f"{name}.pgm")
    out = generate_dataset(fp_dir, args.count, args.output,
                           seed=args.seed, resolution=args.resolution)
    print(f"wrote {args.count} pairs under {out}")
    return EXIT_OK


def cmd_eval(args):
    from .evaluation import Alignment2D, iou
    from .grid import load_pgm

    parts = [float(v) for v in args.align.split(",")]
    if len(parts) != 4:
        raise ValueError("--align needs tx,ty,yaw_deg,scale")
    align = Alignment2D(*parts)
    dmap = load_pgm(args.map_path)
    truth = load_pgm(args.truth)
    classes = [c.strip() for c in args.classes.split(",") if c.strip()]
    results = {cls: iou(dmap, truth, align, cls) for cls in classes}
    for cls, value in results.items():
        print(f"{cls} IoU: {value:.4f}")
    if args.report:
        with open(args.report, "w") as f:
            f.write("class,iou\n")
            for cls, value in results.items():
                f.write(f"{cls},{value:.6f}\n")
    return EXIT_OK


def cmd_bench(args):
    from .evaluation import benchmark_pipeline
    from .pointcloud import load_cloud

    config = _load_config(args)
    if args.input:
        clouds = [load_cloud(p, scan_index=k)
                  for k, p in enumerate(_scan_paths(args.input))]
    else:
        from .datagen import plan_trajectory
        from .synthetic import floorplan_corridor_rooms, simulate_sequence

        fp = floorplan_corridor_rooms()
        traj = plan_trajectory(fp, seed=config.seed)
        idx = np.linspace(0, len(traj) - 1, args.synthetic).astype(int)
        clouds = simulate_sequence(fp, traj[idx])
    report = benchmark_pipeline(clouds, config)
    print(report.format_table())
    if args.output:
        report.write_csv(args.output)
    return EXIT_OK


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    from .cleaner import CleanerModelError

    handlers = {
        "map": cmd_map,
        "clean": cmd_clean,
        "datagen": cmd_datagen,
        "eval": cmd_eval,
        "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except CleanerModelError as e:
        print(f"model error: {e}", file=sys.stderr)
        return EXIT_MODEL
    except (ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
