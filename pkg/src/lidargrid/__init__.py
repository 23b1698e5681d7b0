"""2D occupancy grid mapping driven by 3D LiDAR odometry.

Pipeline stages: point cloud filtering, GICP scan matching with keyframe
submaps, azimuth-binned 2D projection, log-odds evidence integration,
filtration, pluggable map cleaning, plus synthetic dataset generation and
IoU/latency evaluation.
"""

from .pointcloud import (PCD_ASCII, PCD_BINARY, XYZI_CSV, Point3, PointCloud,
                         PreprocessConfig, box_filter, load_cloud,
                         voxel_grid_filter, write_cloud)
from .se3 import PoseSE3
from .registration import (AlignResult, CovPoint, CovPoints, GicpConfig,
                           Keyframe, KeyframeStore, Submap,
                           estimate_covariances, gicp_align,
                           scan_to_map_align, update_keyframes)
from .projection import Scan2D, scan2d_to_endpoints, translate_cloud
from .grid import (FREE, OCCUPIED, UNKNOWN, DiscreteMap, FiltrationConfig,
                   GridConfig, OccupancyGrid, Trajectory, input_filter,
                   integrate_scan, load_pgm, output_filter, record_pose,
                   remove_floating_points, save_pgm, write_trajectory)
from .cleaner import (IdentityCleaner, MorphologicalCleaner, TilePatch,
                      clean_map, make_cleaner, stitch_map, tile_map)
from .datagen import (DatasetPair, ErrorSpec, ErrorSpecRanges,
                      FloorplanRaster, generate_dataset, load_floorplan,
                      plan_trajectory, render_pair)
from .evaluation import Alignment2D, LatencyReport, benchmark_pipeline, iou
from .pipeline import MappingPipeline, PipelineConfig

__version__ = "0.1.0"
