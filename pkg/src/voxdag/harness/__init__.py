"""Persistence, reference renderer, metrics and experiment drivers."""

from .bundle import load_bundle, read_directory, save_bundle
from .camera_path import CameraPath, Keyframe, random_path
from .dense_io import load_dense, save_dense
from .experiment import GroundTruth, RunReport, decode_world, default_far, run_experiment, write_report
from .oracle import OracleImage, oracle_render, pipeline_voxels
from .ssim import ssim, ssim_reference

__all__ = [
    "CameraPath", "GroundTruth", "Keyframe", "OracleImage", "RunReport", "decode_world", "default_far",
    "load_bundle", "load_dense", "oracle_render", "pipeline_voxels", "random_path", "read_directory",
    "run_experiment", "save_bundle", "save_dense", "ssim", "ssim_reference", "write_report",
]
