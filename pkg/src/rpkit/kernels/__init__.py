"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The numba backend is used when numba imports cleanly and the environment
variable ``RPKIT_DISABLE_JIT`` is unset or falsy. Both backends expose the
same functions; ``BACKEND`` names the active one.
"""
import os

from . import _numpy

_FALSY = {"", "0", "false", "no", "off"}


def _jit_requested():
    return os.environ.get("RPKIT_DISABLE_JIT", "").strip().lower() in _FALSY


def load_backend(name):
    """Return the kernel module for ``name`` ('numba' or 'numpy')."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba
        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["numpy"]
    try:
        load_backend("numba")
    except ImportError:
        pass
    else:
        names.insert(0, "numba")
    return names


if _jit_requested():
    try:
        _active = load_backend("numba")
        BACKEND = "numba"
    except ImportError:
        _active = _numpy
        BACKEND = "numpy"
else:
    _active = _numpy
    BACKEND = "numpy"

splitmix64_block = _active.splitmix64_block
jacobi_singular_values = _active.jacobi_singular_values
lstsq = _active.lstsq
rip_scan = _active.rip_scan
subset_lstsq_scan = _active.subset_lstsq_scan
pairwise_distances = _active.pairwise_distances
build_tree = _active.build_tree
collect_candidates = _active.collect_candidates

__all__ = [
    "BACKEND", "available_backends", "load_backend",
    "splitmix64_block", "jacobi_singular_values", "lstsq", "rip_scan",
    "subset_lstsq_scan", "pairwise_distances", "build_tree", "collect_candidates",
]
