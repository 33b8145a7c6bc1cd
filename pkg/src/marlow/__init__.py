"""Image completion from random pixel samples.

The restorer alternates two views of a group of similar image patches: a
multiplanar autoregressive fit across the group's cross-sections, and a
soft shrinkage of the singular values of the stacked patch matrix.
Submodules are imported lazily so CLI startup can pin BLAS threading
before any numerical code loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "image",
    "degrade",
    "patches",
    "ar",
    "lowrank",
    "solver",
    "metrics",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
