"""Location privacy-preserving mechanism design and evaluation toolkit."""

from .geo import Euclidean, GeoPoint, SquaredEuclidean, TagHamming, haversine_project
from .model import DiscreteMechanism, NoiseSampler, PoiSet, Prior, posterior
from .remap import WeiszfeldConfig, constrained_remap, geometric_median, optimal_remap

__all__ = [
    "Euclidean",
    "SquaredEuclidean",
    "TagHamming",
    "GeoPoint",
    "haversine_project",
    "PoiSet",
    "Prior",
    "DiscreteMechanism",
    "NoiseSampler",
    "posterior",
    "WeiszfeldConfig",
    "geometric_median",
    "optimal_remap",
    "constrained_remap",
]

__version__ = "0.1.0"
