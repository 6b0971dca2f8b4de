"""Clark-measure model of Schatten-class perturbations of the shift semigroup."""
from .analytic import InnerFunction, phi_t, psi_t
from .measures import CircleMeasure, LineMeasure, MeasureError, cayley_measure
from .model_ops import PerturbedShiftModel
from .schatten import SingularSpectrum, gram_K, gram_X, gram_Y, schatten_norm

__all__ = [
    "CircleMeasure", "InnerFunction", "LineMeasure", "MeasureError", "PerturbedShiftModel",
    "SingularSpectrum", "cayley_measure", "gram_K", "gram_X", "gram_Y", "phi_t", "psi_t",
    "schatten_norm",
]
__version__ = "0.1.0"
