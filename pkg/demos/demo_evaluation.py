"""Per-stage latency report for the streaming pipeline."""

import numpy as np

from lidargrid import PipelineConfig, benchmark_pipeline
from lidargrid.grid import GridConfig
from lidargrid.synthetic import Lidar3D, floorplan_warehouse, simulate_sequence

fp = floorplan_warehouse()
lidar = Lidar3D(n_azimuth=1500, max_range=100.0, ceiling_z=7.0, sensor_height=1.5,
                ring_elevations_deg=tuple(np.linspace(-15, 15, 20)))
traj = [(20.0 + 0.3 * k, 12.0, 0.0) for k in range(12)]
clouds = simulate_sequence(fp, traj, lidar)
print(f"benchmarking {len(clouds)} warehouse scans of ~{len(clouds[0])} raw points")

config = PipelineConfig(grid=GridConfig(resolution=0.05), every_n=6,
                        cleaner="morph")
report = benchmark_pipeline(clouds, config)
print(report.format_table())
report.write_csv("demo_latency.csv")
print("report written to demo_latency.csv")
