"""Scanpath prediction and evaluation toolkit."""
from .core import Fixation, FixationMap, SaccadeVector, SaliencyMap, Scanpath, rasterize, saccade_vectors
from .metrics import MultiMatchResult, congruency, multimatch, normalize_saliency, nss, otsu_threshold

__all__ = [
    "Fixation", "FixationMap", "SaccadeVector", "SaliencyMap", "Scanpath", "rasterize",
    "saccade_vectors", "MultiMatchResult", "congruency", "multimatch", "normalize_saliency",
    "nss", "otsu_threshold",
]
__version__ = "0.1.0"
