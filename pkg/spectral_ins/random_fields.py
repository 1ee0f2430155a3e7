import logging
from typing import Optional, Sequence

import numpy as np

from spectral_ins import spectral

logger = logging.getLogger(__name__)


def generator(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def shell_amplitudes(rng, shells: Sequence[int], low=0.5, high=1.5):
    """One amplitude per shell, drawn once and then fixed by the seed."""
    return dict(zip(shells, rng.uniform(low, high, size=len(shells))))


def lowest_shells(grid: spectral.Grid, count=1):
    """The first ``count`` shells that hold lattice modes."""
    partition = spectral.build_partition(grid)
    occupied = [j for j in partition.indices if np.any(partition.mask(j))]
    return occupied[:count]


def band_limited(
    grid: spectral.Grid,
    rng: np.random.Generator,
    shape=(),
    shells: Optional[Sequence[int]] = None,
    amplitudes: Optional[dict] = None,
    decay: float = 0.0,
    norm: Optional[float] = None,
) -> spectral.SpectralField:
    """Mean-zero random field whose spectrum is sum_j amp_j 2^{-j decay} phi_j times white noise."""
    partition = spectral.build_partition(grid)
    shells = list(partition.indices if shells is None else shells)
    if amplitudes is None:
        amplitudes = shell_amplitudes(rng, shells)
    noise = rng.standard_normal(tuple(shape) + grid.shape)
    coefficients = np.fft.rfftn(noise, axes=grid.axes, norm="forward")
    mask = np.zeros(grid.rshape)
    for j in shells:
        mask = mask + amplitudes[j] * 2.0 ** (-j * decay) * partition.mask(j)
    field = spectral.SpectralField(grid, coefficients * mask, True)
    if norm is not None:
        size = spectral.lp_norm(field, 2)
        if size > 0:
            field = field * (norm / size)
    return field


def divergence_free(grid, rng, shells=None, decay=0.0, norm=None) -> spectral.SpectralField:
    raw = band_limited(grid, rng, shape=(grid.n,), shells=shells, decay=decay)
    field, _ = spectral.leray_split(raw)
    if norm is not None:
        size = spectral.lp_norm(field, 2)
        if size > 0:
            field = field * (norm / size)
    return field


def coefficient_values(grid, rng, bar, oscillation, shells=None, decay=1.0):
    """Samples bar * (1 + oscillation * g) with g a mean-zero random field of unit grid max."""
    partition = spectral.build_partition(grid)
    if shells is None:
        shells = [j for j in partition.indices if j <= partition.j_min + 2]
        shells = [j for j in shells if np.any(partition.mask(j))]
    g = band_limited(grid, rng, shells=shells, decay=decay)
    peak = float(np.max(np.abs(g.physical)))
    if peak == 0.0 or oscillation == 0.0:
        return spectral.SpectralField.constant(grid, bar)
    return spectral.SpectralField.constant(grid, bar) + g * (bar * oscillation / peak)


def one_shell_field(grid, j0, amplitude=1.0, axis=0, shape=()) -> spectral.SpectralField:
    """cos(2^{j0} x_axis): a single mode at the centre of shell j0 (needs 2^{j0} on the lattice)."""
    k = [0] * grid.n
    k[axis] = int(round(2.0 ** j0 / grid.k0))
    if k[axis] == 0 or abs(k[axis] * grid.k0 - 2.0 ** j0) > 1e-12:
        raise ValueError(f"shell {j0} has no lattice mode at its centre on {grid}")
    direction = None
    if shape:
        direction = np.zeros(shape[0])
        direction[(axis + 1) % shape[0]] = 1.0
    return spectral.fourier_mode(grid, k, amplitude, direction=direction)
