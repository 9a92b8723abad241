"""Convolution powers and compound Poisson distribution functions.

Severities are discretised by rounding onto the lattice ``{0, h, 2h, ...}``
with exact cell masses ``F((j+1/2)h) - F((j-1/2)h)``. The CDF of a sum is
then read off at the half-lattice point ``(G - 1/2) h``, which is chosen to
coincide with the evaluation point. Convolution powers are built by
repeated FFT convolution truncated to the lattice; truncation is exact for
CDF values because severities are positive.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from .errors import NumericalToleranceError, ParameterError

__all__ = [
    "DEFAULT_GRID_SIZE",
    "SERIES_TAIL",
    "poisson_truncation",
    "lattice_masses",
    "nfold_cdf_at",
    "nfold_cdf",
    "compound_poisson_cdf",
]

DEFAULT_GRID_SIZE = 2**14
SERIES_TAIL = 1e-12


def poisson_truncation(mean, tail=SERIES_TAIL):
    """Smallest ``n`` with ``P(N > n) < tail`` for ``N ~ Poisson(mean)``."""
    if mean < 0:
        raise ParameterError("Poisson mean must be nonnegative")
    if mean == 0:
        return 0
    n = int(stats.poisson.ppf(1.0 - tail, mean))
    while stats.poisson.sf(n, mean) >= tail:
        n += 1
    while n > 0 and stats.poisson.sf(n - 1, mean) < tail:
        n -= 1
    return n


def lattice_masses(dist, x, grid_size=DEFAULT_GRID_SIZE):
    """Rounded lattice masses of ``dist`` with step ``x / (grid_size - 1/2)``.

    Returns:
        ``(masses, h)`` where ``masses[j]`` is the probability mass assigned
        to ``j * h`` and ``masses.sum() == F(x)``.
    """
    h = x / (grid_size - 0.5)
    edges = (np.arange(grid_size) + 0.5) * h
    upper = dist.cdf_on_grid(edges)
    masses = np.diff(np.concatenate(([0.0], upper)))
    return np.clip(masses, 0.0, None), h


def nfold_cdf_at(dists, xs, n_max, grid_size=DEFAULT_GRID_SIZE):
    """``F_b^{n*}(x_b)`` for a batch of (law, point) pairs and ``n = 0..n_max``.

    Args:
        dists: sequence of severity laws (length ``B``).
        xs: evaluation points, one per law.
        n_max: highest convolution power.

    Returns:
        Array of shape ``(n_max + 1, B)``; row ``n`` holds ``F^{n*}(x_b)``.
    """
    xs = np.asarray(xs, dtype=float)
    batch = len(dists)
    if xs.shape != (batch,):
        raise ParameterError("one evaluation point per law is required")
    if np.any(xs < 0):
        raise ParameterError("convolution CDF is defined for x >= 0")
    out = np.ones((n_max + 1, batch))
    active = np.flatnonzero(xs > 0)
    out[1:, xs <= 0] = 0.0
    if n_max == 0 or active.size == 0:
        return out
    masses = np.empty((active.size, grid_size))
    for row, b in enumerate(active):
        masses[row], _ = lattice_masses(dists[b], xs[b], grid_size)
    nfft = 2 * grid_size
    spectrum = np.fft.rfft(masses, nfft, axis=1)
    current = masses
    out[1, active] = current.sum(axis=1)
    for n in range(2, n_max + 1):
        current = np.fft.irfft(np.fft.rfft(current, nfft, axis=1) * spectrum, nfft,
                               axis=1)[:, :grid_size]
        np.clip(current, 0.0, None, out=current)
        out[n, active] = np.minimum(current.sum(axis=1), out[n - 1, active])
    return out


def nfold_cdf(dist, n, x, grid_size=DEFAULT_GRID_SIZE, atol=None):
    """CDF of the sum of ``n`` i.i.d. draws of ``dist`` at ``x``.

    ``n == 0`` gives 1 for ``x >= 0``. With ``atol`` set, the result is
    compared against a half-resolution lattice and a
    :class:`NumericalToleranceError` is raised when the Richardson error
    estimate exceeds ``atol``.
    """
    if n < 0 or int(n) != n:
        raise ParameterError("n must be a nonnegative integer")
    n = int(n)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr < 0):
        raise ParameterError("convolution CDF is defined for x >= 0")
    values = nfold_cdf_at([dist] * x_arr.size, x_arr, n, grid_size)[n]
    if atol is not None and n >= 1:
        coarse = nfold_cdf_at([dist] * x_arr.size, x_arr, n, grid_size // 2)[n]
        err = float(np.max(np.abs(values - coarse)) / 3.0)
        if err > atol:
            raise NumericalToleranceError(
                f"lattice of {grid_size} points cannot reach atol={atol}", achieved=err)
    return float(values[0]) if np.ndim(x) == 0 else values


def compound_poisson_cdf(Lambda, dist, x, grid_size=DEFAULT_GRID_SIZE, tail=SERIES_TAIL):
    """``P(sum_{k<=N} X_k <= x)`` for ``N ~ Poisson(Lambda)``."""
    if Lambda < 0:
        raise ParameterError("Lambda must be nonnegative")
    if x <= 0:
        raise ParameterError("x must be positive")
    n_max = poisson_truncation(Lambda, tail)
    table = nfold_cdf_at([dist], [x], n_max, grid_size)[:, 0]
    pmf = stats.poisson.pmf(np.arange(n_max + 1), Lambda)
    return float(np.clip(pmf @ table, 0.0, 1.0))
