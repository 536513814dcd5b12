"""Open quantum-walk simulation and neural-density-operator tomography."""

from . import fileio, kernels, maxlik, measurement, metrics, ndo, training, walk

__all__ = [
    "fileio",
    "kernels",
    "maxlik",
    "measurement",
    "metrics",
    "ndo",
    "training",
    "walk",
]

__version__ = "0.1.0"
