"""Non-Euclidean elastic ribbons: geometry, limit energies, constructions, simulation."""

from .errors import ConstructionError, DomainError, GeometryError
from .geometry import (PRESETS, RibbonGeometry, build_euclidean_ribbon, codazzi_deficit,
                       gauss_deficit, gauss_deficit_1, metric_at, preset)
from .limit_energies import (MidlineState, codazzi_i, e0_codazzi, e0_gauss, min_j, plate_energy,
                             wide_j)
from .quadratic_forms import IsotropicModuli

__version__ = "0.1.0"

__all__ = [
    "ConstructionError", "DomainError", "GeometryError", "PRESETS", "RibbonGeometry",
    "build_euclidean_ribbon", "codazzi_deficit", "gauss_deficit", "gauss_deficit_1",
    "metric_at", "preset", "MidlineState", "codazzi_i", "e0_codazzi", "e0_gauss", "min_j",
    "plate_energy", "wide_j", "IsotropicModuli",
]
