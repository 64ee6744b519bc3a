from .series import load_labeled_series, z_normalize, z_normalize_batch
from .fcn import FcnModel, gradient_check, same_padding
from .cam import (GRAD_CAM, HIRES_CAM, Heatmap, compute_heatmap, grad_cam,
                  hires_cam, render_svg)

__all__ = [
    "FcnModel", "GRAD_CAM", "HIRES_CAM", "Heatmap", "compute_heatmap",
    "grad_cam", "gradient_check", "hires_cam", "load_labeled_series",
    "render_svg", "same_padding", "z_normalize", "z_normalize_batch",
]
