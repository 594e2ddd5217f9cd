"""Semi-automated LiDAR annotation engine.

Tracking-by-detection auto-labeling, single-object annotation propagation,
trajectory post-processing, a queryable ground model, synthetic scenes for
validation, and file/HTTP interfaces for an annotation UI.
"""

from lidarlabel.geometry import CLASSES, Box7, Detection, PointCloud, normalize_yaw

__version__ = "0.1.0"

__all__ = [
    "Box7",
    "CLASSES",
    "Detection",
    "PointCloud",
    "normalize_yaw",
    "__version__",
]
