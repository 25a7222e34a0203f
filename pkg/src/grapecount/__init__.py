"""Detection-stream positioning and deduplicated counting of grape bunches."""

from ._accel import backend
from .counter import CounterConfig, CountingList, diff
from .geometry import CameraIntrinsics, DepthImage, Pixel, RigidTransform, backproject, project, register_depth, transform_point
from .locator import LocatorConfig, locate, sample_depth
from .pipeline import CountReport, Pipeline, PipelineConfig, RunSummary, process_stream, run_experiment
from .tracker import CentroidTracker, TrackerConfig, centroid_of

__version__ = "0.1.0"
