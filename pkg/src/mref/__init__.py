"""Model-referential instruction uplink toolkit.

Instructions travel as pose references into an on-device asset catalog
rather than as 3D models; see the README for the module map.
"""

from mref.authoring import CompileFailed, compile_csv, parse_csv
from mref.instructions import AssetCatalog, InstructionSet, parse_catalog, resolve, validate
from mref.link import PRESETS, Link, LinkConfig, bandwidth_stats
from mref.pose import Pose, Quat, Vec3, pose_compose
from mref.wire import decode, encode, size_report

__all__ = [
    "AssetCatalog", "CompileFailed", "InstructionSet", "Link", "LinkConfig", "PRESETS", "Pose",
    "Quat", "Vec3", "bandwidth_stats", "compile_csv", "decode", "encode", "parse_catalog",
    "parse_csv", "pose_compose", "resolve", "size_report", "validate",
]
