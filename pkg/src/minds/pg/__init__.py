"""Exact Polya-Gamma PG(1, c) sampling with a compiled core and a NumPy fallback.

The compiled extension is used when available; set ``MINDS_PURE_PYTHON=1`` to
force the NumPy implementation. Both implement the same exact rejection
sampler; they consume the random stream differently, so draw sequences are
reproducible per backend, not across backends.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from ._numpy_impl import (
    pg1_array as _pg1_numpy,
    pg_mean_series,
    pg_var_series,
    sample_pg_series,
)

_FORCE_PURE = os.environ.get("MINDS_PURE_PYTHON", "") not in ("", "0")

try:
    if _FORCE_PURE:
        raise ImportError("pure-python mode forced")
    from . import _devroye as _ext
except ImportError:
    _ext = None

HAVE_EXTENSION = _ext is not None
ACTIVE_BACKEND = "cython" if HAVE_EXTENSION else "numpy"

# below this |c| the closed-form mean switches to its limit 1/4
MEAN_TILT_CUTOFF = 1e-6


@dataclass(frozen=True)
class PolyaGammaParams:
    """PG(b, c) parameters; the model only exercises b = 1."""

    shape_b: float = 1.0
    tilt_c: float = 0.0

    def __post_init__(self):
        if not (self.shape_b > 0):
            raise ValueError(f"shape_b must be positive, got {self.shape_b}")
        if not math.isfinite(self.tilt_c):
            raise ValueError(f"tilt_c must be finite, got {self.tilt_c}")


def pg1_array(psi, rng, backend=None):
    """Vectorized PG(1, psi) draws; the workhorse for the Gibbs augmentation step.

    Parameters
    ----------
    psi : array_like
        Tilt values, any shape. Must be finite.
    rng : numpy.random.Generator
    backend : {None, "cython", "numpy"}
        Explicit backend override, mainly for benchmarks and parity tests.
    """
    psi = np.ascontiguousarray(psi, dtype=np.float64)
    if not np.isfinite(psi).all():
        raise ValueError("non-finite tilt in PG sampler input")
    if backend is None:
        backend = ACTIVE_BACKEND
    if backend == "cython":
        if _ext is None:
            raise RuntimeError("compiled PG backend is not available")
        out = np.empty(psi.size)
        _ext.draw_pg1_into(rng.bit_generator, psi.ravel(), out)
        return out.reshape(psi.shape)
    if backend == "numpy":
        return _pg1_numpy(psi, rng)
    raise ValueError(f"unknown backend {backend!r}")


def sample_pg(params: PolyaGammaParams, rng) -> float:
    """One exact PG(b, c) draw; b must be a positive integer (b = 1 in the model)."""
    b = params.shape_b
    if b != int(b):
        raise ValueError("only integer shape_b is supported")
    draws = pg1_array(np.full(int(b), params.tilt_c), rng)
    return float(draws.sum())


def pg_mean(params: PolyaGammaParams) -> float:
    """Closed-form mean tanh(c/2)/(2c) of PG(1, c), with the limit 1/4 near c = 0."""
    if params.shape_b != 1:
        raise ValueError("pg_mean is defined for shape_b = 1")
    c = params.tilt_c
    if abs(c) < MEAN_TILT_CUTOFF:
        return 0.25
    return math.tanh(0.5 * c) / (2.0 * c)


__all__ = [
    "ACTIVE_BACKEND",
    "HAVE_EXTENSION",
    "MEAN_TILT_CUTOFF",
    "PolyaGammaParams",
    "pg1_array",
    "pg_mean",
    "pg_mean_series",
    "pg_var_series",
    "sample_pg",
    "sample_pg_series",
]
