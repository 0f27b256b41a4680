"""Curve shortening flow laboratory.

Discrete curves and their geometry, Gaussian weighted length and entropy,
forward evolution, analytic ancient flows, and numerical checks of the
structural properties of ancient solutions.
"""

from .curve import (DiscreteCurve, GeometryField, InvalidCurveError, Topology, check_embedded,
                    compute_geometry, load_curve, resample_by_arclength, save_curve)
from .flow import (EvolveControls, FlowHistory, RescaledSlice, evolve, rescale_history,
                   residual_csf, step)
from .functionals import (EntropyConfig, EntropyResult, count_angle_preimages, entropy_estimate,
                          gaussian_length, total_curvature, total_curvature_area_formula)

__version__ = "0.1.0"

__all__ = [
    "DiscreteCurve", "GeometryField", "InvalidCurveError", "Topology", "check_embedded",
    "compute_geometry", "load_curve", "resample_by_arclength", "save_curve",
    "EvolveControls", "FlowHistory", "RescaledSlice", "evolve", "rescale_history",
    "residual_csf", "step",
    "EntropyConfig", "EntropyResult", "count_angle_preimages", "entropy_estimate",
    "gaussian_length", "total_curvature", "total_curvature_area_formula",
]
