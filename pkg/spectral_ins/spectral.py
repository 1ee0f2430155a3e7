import dataclasses
import functools
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from spectral_ins import constants
from spectral_ins import errors

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Grid:
    """Uniform periodic grid of N points per axis on the box [0, L)^n."""

    n: int
    N: int
    L: float = constants.DEFAULT_L

    def __post_init__(self):
        if self.n not in constants.SUPPORTED_DIMENSIONS:
            raise errors.InvalidInputError(f"dimension n={self.n} not in {{2, 3}}")
        if self.N < constants.MIN_POINTS_PER_AXIS or self.N & (self.N - 1) != 0:
            raise errors.InvalidInputError(
                f"N={self.N} must be a power of two and at least {constants.MIN_POINTS_PER_AXIS}"
            )
        if not self.L > 0:
            raise errors.InvalidInputError(f"box side L={self.L} must be positive")

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def rshape(self) -> Tuple[int, ...]:
        return (self.N,) * (self.n - 1) + (self.N // 2 + 1,)

    @property
    def axes(self) -> Tuple[int, ...]:
        return tuple(range(-self.n, 0))

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.L

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.n

    @property
    def volume(self) -> float:
        return self.L ** self.n

    @property
    def points(self) -> int:
        return self.N ** self.n

    def dilated(self, l: float) -> "Grid":
        """Same samples on a box of side L/l: u(x) on this grid is u(l x) on the result."""
        return Grid(self.n, self.N, self.L / l)

    def to_dict(self):
        return {"n": self.n, "N": self.N, "L": self.L}

    @functools.cached_property
    def integer_wavenumbers(self) -> Tuple[np.ndarray, ...]:
        result = []
        for axis in range(self.n):
            if axis == self.n - 1:
                k = np.fft.rfftfreq(self.N, 1.0 / self.N)
            else:
                k = np.fft.fftfreq(self.N, 1.0 / self.N)
            view = [1] * self.n
            view[axis] = k.size
            result.append(k.reshape(view))
        return tuple(result)

    @functools.cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.stack(
            [np.broadcast_to(k * self.k0, self.rshape) for k in self.integer_wavenumbers]
        )

    @functools.cached_property
    def k_squared(self) -> np.ndarray:
        return np.sum(self.wavenumbers ** 2, axis=0)

    @functools.cached_property
    def k_magnitude(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @functools.cached_property
    def nyquist_mask(self) -> np.ndarray:
        mask = np.zeros(self.rshape, dtype=bool)
        for k in self.integer_wavenumbers:
            mask |= np.abs(k) == self.N // 2
        return mask

    @functools.cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(self.rshape, dtype=bool)
        for k in self.integer_wavenumbers:
            mask &= np.abs(k) < self.N / 3
        return mask

    @functools.cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each stored rfft coefficient in the full spectrum."""
        last = np.full(self.N // 2 + 1, 2.0)
        last[0] = 1.0
        last[-1] = 1.0
        return np.broadcast_to(last, self.rshape)

    def coordinates(self) -> np.ndarray:
        x = np.arange(self.N) * self.dx
        return np.stack(np.meshgrid(*([x] * self.n), indexing="ij"))


def _zero_mean_index(grid):
    return (0,) * grid.n


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralField:
    """Real field on a periodic grid held by its rfft coefficients.

    ``fourier`` has shape ``shape + grid.rshape`` with ``shape`` the component
    shape: () for scalars, (n,) for vectors, (n, n) for matrices. Coefficients
    are normalised so that u(x) = sum_k fourier[k] exp(i k.x); Nyquist planes
    are always zero.
    """

    grid: Grid
    fourier: np.ndarray
    mean_excluded: bool = False

    def __post_init__(self):
        fourier = np.array(self.fourier, dtype=complex)
        if fourier.shape[fourier.ndim - self.grid.n :] != self.grid.rshape:
            raise errors.InvalidInputError(
                f"coefficient shape {fourier.shape} does not end with {self.grid.rshape}"
            )
        fourier[..., self.grid.nyquist_mask] = 0.0
        if self.mean_excluded:
            fourier[(Ellipsis,) + _zero_mean_index(self.grid)] = 0.0
        object.__setattr__(self, "fourier", fourier)

    @classmethod
    def from_physical(cls, grid, values, mean_excluded=False):
        values = np.asarray(values, dtype=float)
        coefficients = np.fft.rfftn(values, axes=grid.axes, norm="forward")
        return cls(grid, coefficients, mean_excluded)

    @classmethod
    def zeros(cls, grid, shape=()):
        return cls(grid, np.zeros(tuple(shape) + grid.rshape, dtype=complex), True)

    @classmethod
    def constant(cls, grid, value, shape=()):
        coefficients = np.zeros(tuple(shape) + grid.rshape, dtype=complex)
        coefficients[(Ellipsis,) + _zero_mean_index(grid)] = value
        return cls(grid, coefficients)

    @functools.cached_property
    def physical(self) -> np.ndarray:
        return np.fft.irfftn(
            self.fourier, s=self.grid.shape, axes=self.grid.axes, norm="forward"
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.fourier.shape[: self.fourier.ndim - self.grid.n]

    @property
    def components(self) -> int:
        return int(np.prod(self.shape, dtype=int))

    @property
    def mean(self):
        return self.fourier[(Ellipsis,) + _zero_mean_index(self.grid)].real

    def is_mean_zero(self, tol=constants.REALITY_TOLERANCE) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.fourier), initial=0.0)))
        return bool(np.all(np.abs(self.mean) <= tol * scale))

    def is_constant(self) -> bool:
        rest = self.fourier.copy()
        rest[(Ellipsis,) + _zero_mean_index(self.grid)] = 0.0
        return not np.any(rest)

    def without_mean(self) -> "SpectralField":
        return SpectralField(self.grid, self.fourier, True)

    def with_fourier(self, fourier, mean_excluded=None) -> "SpectralField":
        if mean_excluded is None:
            mean_excluded = self.mean_excluded
        return SpectralField(self.grid, fourier, mean_excluded)

    def __getitem__(self, index) -> "SpectralField":
        if not isinstance(index, tuple):
            index = (index,)
        if len(index) > len(self.shape):
            raise IndexError(f"component index {index} for shape {self.shape}")
        return SpectralField(self.grid, self.fourier[index], self.mean_excluded)

    def transpose(self) -> "SpectralField":
        return self.with_fourier(np.swapaxes(self.fourier, 0, 1))

    def _check(self, other):
        if self.grid != other.grid:
            raise errors.GridMismatchError(self.grid, other.grid)

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(
                self.grid,
                self.fourier + other.fourier,
                self.mean_excluded and other.mean_excluded,
            )
        result = self.fourier.copy()
        result[(Ellipsis,) + _zero_mean_index(self.grid)] += other
        return SpectralField(self.grid, result)

    __radd__ = __add__

    def __neg__(self):
        return self.with_fourier(-self.fourier)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return multiply(self, scalar, dealias=False)
        return self.with_fourier(self.fourier * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.with_fourier(self.fourier / scalar)

    def __repr__(self):
        return f"SpectralField(shape={self.shape}, grid={self.grid})"


def stack(fields: Sequence[SpectralField]) -> SpectralField:
    grid = fields[0].grid
    for f in fields[1:]:
        fields[0]._check(f)
    return SpectralField(
        grid,
        np.stack([f.fourier for f in fields]),
        all(f.mean_excluded for f in fields),
    )


def identity_matrix(grid: Grid) -> SpectralField:
    return SpectralField.constant(grid, np.eye(grid.n), shape=(grid.n, grid.n))


def _common_grid(fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise errors.GridMismatchError(grid, f.grid)
    return grid


def project_product(grid, values, dealias=True) -> SpectralField:
    """Return to coefficient space from physical samples of a product."""
    coefficients = np.fft.rfftn(values, axes=grid.axes, norm="forward")
    if dealias:
        coefficients = coefficients * grid.dealias_mask
    return SpectralField(grid, coefficients)


def multiply(f: SpectralField, g: SpectralField, dealias=True) -> SpectralField:
    """Pointwise product; a scalar factor broadcasts over the other's components.

    ``dealias=False`` keeps the plain collocation product used by the linear
    variable-coefficient operators.
    """
    grid = _common_grid([f, g])
    a, b = f.physical, g.physical
    if f.shape and g.shape and f.shape != g.shape:
        raise errors.InvalidInputError(f"cannot multiply shapes {f.shape} and {g.shape}")
    if not f.shape and g.shape:
        a = a[(None,) * len(g.shape)]
    if not g.shape and f.shape:
        b = b[(None,) * len(f.shape)]
    return project_product(grid, a * b, dealias)


def einsum(subscripts: str, *fields: SpectralField, dealias=True) -> SpectralField:
    """Pointwise tensor contraction over component indices, e.g. "ij,j->i"."""
    grid = _common_grid(fields)
    inputs, output = subscripts.split("->")
    inputs = ",".join(s + "..." for s in inputs.split(","))
    values = np.einsum(f"{inputs}->{output}...", *[f.physical for f in fields])
    return project_product(grid, values, dealias)


def apply_pointwise(f: SpectralField, fn: Callable[[np.ndarray], np.ndarray]):
    """Apply a pointwise nonlinearity to the physical samples (collocation)."""
    return SpectralField.from_physical(f.grid, fn(f.physical))


@dataclasses.dataclass(frozen=True, eq=False)
class DyadicPartition:
    grid: Grid
    j_min: int
    j_max: int
    phi_masks: np.ndarray
    chi_mask: np.ndarray
    band: np.ndarray

    @property
    def indices(self):
        return range(self.j_min, self.j_max + 1)

    def check_index(self, j, upper=None):
        upper = self.j_max if upper is None else upper
        if not (self.j_min <= j <= upper):
            raise errors.IndexRangeError(j, self.j_min, upper)

    def mask(self, j) -> np.ndarray:
        self.check_index(j)
        return self.phi_masks[j - self.j_min]

    def low_mask(self, j) -> np.ndarray:
        """chi(2^-j D): the k=0 mode plus every shell below j (clamped to the range)."""
        j = min(max(j, self.j_min), self.j_max + 1)
        return self.chi_mask + np.sum(self.phi_masks[: j - self.j_min], axis=0)

    def neighbour_mask(self, j) -> np.ndarray:
        lo = max(j - 1, self.j_min)
        hi = min(j + 1, self.j_max)
        return np.sum(self.phi_masks[lo - self.j_min : hi - self.j_min + 1], axis=0)

    def shell_scale(self, j) -> float:
        return 2.0 ** j


def _smooth_step(t):
    """1 for t <= 0, 0 for t >= 1, C-infinity in between."""

    def h(x):
        out = np.zeros_like(x)
        positive = x > 0
        out[positive] = np.exp(-1.0 / x[positive])
        return out

    t = np.asarray(t, dtype=float)
    up = h(1.0 - t)
    return up / (up + h(t))


def cutoff_profile(r):
    """Radial low-frequency profile: 1 on r <= 3/4, 0 on r >= 1."""
    inner = constants.PARTITION_INNER
    return _smooth_step((np.asarray(r, dtype=float) - inner) / (1.0 - inner))


def annulus_profile(r):
    """chi(r/2) - chi(r): supported in [3/4, 2] and equal to 1 on [1, 3/2].

    The support sits inside the (3/4, 8/3) annulus used for Bernstein ratios
    and shell sizing, so blocks built from it satisfy the annulus bounds.
    """
    r = np.asarray(r, dtype=float)
    return cutoff_profile(r / 2.0) - cutoff_profile(r)


def dyadic_range(grid: Grid):
    """Shell indices j_min..j_max on the grid.

    j_max is the largest j whose (3/4, 8/3) * 2^j annulus still ends below
    Nyquist, which is stricter than the [3/4, 2] * 2^j support of its block.
    """
    j_min = math.ceil(math.log2(grid.k0)) - 1
    j_max = math.floor(math.log2(grid.N / 2 * grid.k0 / constants.PARTITION_OUTER))
    return j_min, j_max


@functools.lru_cache(maxsize=32)
def build_partition(grid: Grid) -> DyadicPartition:
    j_min, j_max = dyadic_range(grid)
    shells = j_max - j_min + 1
    if shells < constants.MIN_SHELLS:
        raise errors.InsufficientResolution(grid.N, shells)
    logger.info(f"building partition for {grid}: shells {j_min}..{j_max}")

    r = grid.k_magnitude
    masks = np.stack([annulus_profile(r / 2.0 ** j) for j in range(j_min, j_max + 1)])
    masks[:, grid.nyquist_mask] = 0.0
    total = masks.sum(axis=0)
    band = (total > 0) & (r < 2.0 ** (j_max + 1))
    masks = np.where(band, masks / np.where(band, total, 1.0), 0.0)

    chi = np.zeros(grid.rshape)
    chi[_zero_mean_index(grid)] = 1.0
    return DyadicPartition(grid, j_min, j_max, masks, chi, band)


def partition_report(partition: DyadicPartition):
    """Partition identity defects over the resolved band."""
    total = partition.phi_masks.sum(axis=0)
    squares = (partition.phi_masks ** 2).sum(axis=0)
    band = partition.band
    overlap = 0.0
    for a in range(len(partition.phi_masks)):
        for b in range(a + 2, len(partition.phi_masks)):
            overlap = max(
                overlap, float(np.max(partition.phi_masks[a] * partition.phi_masks[b]))
            )
    r = partition.grid.k_magnitude
    support = 0.0
    for index, j in enumerate(partition.indices):
        scaled = r / 2.0 ** j
        outside = (scaled < constants.PARTITION_INNER) | (
            scaled > constants.PARTITION_OUTER
        )
        support = max(support, float(np.max(np.abs(partition.phi_masks[index][outside]), initial=0.0)))
    return {
        "sum_defect": float(np.max(np.abs(total[band] - 1.0))),
        "square_sum_min": float(np.min(squares[band])),
        "square_sum_max": float(np.max(squares[band])),
        "overlap_max": overlap,
        "support_leak": support,
        "j_min": partition.j_min,
        "j_max": partition.j_max,
        "resolved_modes": int(np.count_nonzero(band)),
    }


def _apply_mask(u: SpectralField, mask) -> SpectralField:
    return u.with_fourier(u.fourier * mask)


def dyadic_block(u: SpectralField, j: int) -> SpectralField:
    partition = build_partition(u.grid)
    return SpectralField(u.grid, u.fourier * partition.mask(j), True)


def dyadic_blocks(u: SpectralField):
    partition = build_partition(u.grid)
    return {
        j: SpectralField(u.grid, u.fourier * partition.phi_masks[index], True)
        for index, j in enumerate(partition.indices)
    }


def low_cutoff(u: SpectralField, j: int) -> SpectralField:
    partition = build_partition(u.grid)
    partition.check_index(j, upper=partition.j_max + 1)
    return _apply_mask(u, partition.low_mask(j))


def high_cutoff(u: SpectralField, j: int) -> SpectralField:
    """(Id - S_j) u restricted to the resolved band, mean removed."""
    partition = build_partition(u.grid)
    partition.check_index(j, upper=partition.j_max + 1)
    mask = np.sum(partition.phi_masks[j - partition.j_min :], axis=0)
    return SpectralField(u.grid, u.fourier * mask, True)


def neighbour_block(u: SpectralField, j: int) -> SpectralField:
    partition = build_partition(u.grid)
    return SpectralField(u.grid, u.fourier * partition.neighbour_mask(j), True)


def band_limit(u: SpectralField) -> SpectralField:
    partition = build_partition(u.grid)
    return _apply_mask(u, partition.band | partition.chi_mask.astype(bool))


def truncation_report(u: SpectralField):
    """Energy fractions held by the k=0 block, the boundary shells and the out-of-band modes."""
    partition = build_partition(u.grid)
    weights = u.grid.rfft_weights
    density = np.abs(u.fourier) ** 2
    if u.shape:
        density = density.reshape((-1,) + u.grid.rshape).sum(axis=0)
    density = density * weights
    total = float(density.sum())
    if total == 0.0:
        return {"chi_block": 0.0, "lowest_shell": 0.0, "highest_shell": 0.0, "out_of_band": 0.0}
    masks = partition.phi_masks ** 2
    return {
        "chi_block": float((density * partition.chi_mask).sum()) / total,
        "lowest_shell": float((density * masks[0]).sum()) / total,
        "highest_shell": float((density * masks[-1]).sum()) / total,
        "out_of_band": float(
            density[~(partition.band | partition.chi_mask.astype(bool))].sum()
        )
        / total,
    }


@dataclasses.dataclass(frozen=True)
class Multiplier:
    """Homogeneous Fourier multiplier.

    ``symbol_fn(grid)`` returns either an ``rshape`` array (applied to every
    component) or an ``(m, k) + rshape`` array contracted with the leading
    component axis of the field.
    """

    name: str
    degree: float
    symbol_fn: Callable[[Grid], np.ndarray]

    def symbol(self, grid: Grid) -> np.ndarray:
        return self.symbol_fn(grid)

    def is_matrix(self, grid: Grid) -> bool:
        return self.symbol(grid).ndim > grid.n


def _inverse_k_squared(grid):
    k2 = grid.k_squared
    out = np.zeros_like(k2)
    nonzero = k2 > 0
    out[nonzero] = 1.0 / k2[nonzero]
    return out


def _inverse_k(grid):
    return np.sqrt(_inverse_k_squared(grid))


def _gradient_projector(grid):
    xi = grid.wavenumbers
    return xi[:, None] * xi[None, :] * _inverse_k_squared(grid)


IDENTITY = Multiplier("identity", 0, lambda grid: np.ones(grid.rshape))
LAPLACIAN = Multiplier("laplacian", 2, lambda grid: -grid.k_squared)
INVERSE_LAPLACIAN = Multiplier(
    "inverse_laplacian", -2, lambda grid: -_inverse_k_squared(grid)
)
LERAY_Q = Multiplier("leray_q", 0, _gradient_projector)
LERAY_P = Multiplier(
    "leray_p",
    0,
    lambda grid: np.eye(grid.n).reshape((grid.n, grid.n) + (1,) * grid.n)
    - _gradient_projector(grid),
)


def partial(l: int) -> Multiplier:
    return Multiplier(f"partial_{l}", 1, lambda grid: 1j * grid.wavenumbers[l])


def riesz(l: int) -> Multiplier:
    return Multiplier(
        f"riesz_{l}", 0, lambda grid: -1j * grid.wavenumbers[l] * _inverse_k(grid)
    )


def leray_component(i: int, k: int) -> Multiplier:
    return Multiplier(
        f"leray_p_{i}{k}", 0, lambda grid: LERAY_P.symbol(grid)[i, k]
    )


def fractional_derivative(s: float) -> Multiplier:
    """|D|^s, zero on the k=0 mode."""

    def symbol(grid):
        k = grid.k_magnitude
        out = np.zeros_like(k)
        out[k > 0] = k[k > 0] ** s
        return out

    return Multiplier(f"abs_d^{s}", s, symbol)


def apply_multiplier(A: Multiplier, u: SpectralField) -> SpectralField:
    if A.degree < 0 and not u.is_mean_zero():
        raise errors.ZeroModeError(f"multiplier {A.name} of degree {A.degree}")
    symbol = A.symbol(u.grid)
    if symbol.ndim == u.grid.n:
        out = symbol * u.fourier
    else:
        if not u.shape or u.shape[0] != symbol.shape[1]:
            raise errors.InvalidInputError(
                f"matrix multiplier {A.name} needs a field with leading axis {symbol.shape[1]}"
            )
        extra = len(u.shape) - 1
        s = symbol.reshape(symbol.shape[:2] + (1,) * extra + u.grid.rshape)
        out = np.einsum("ik...,k...->i...", s, u.fourier)
    mean_excluded = u.mean_excluded or A.degree != 0 or A is LERAY_Q
    return SpectralField(u.grid, out, mean_excluded)


def gradient(u: SpectralField) -> SpectralField:
    """Prepends a derivative axis: (grad u)[l, ...] = d_l u[...]."""
    xi = u.grid.wavenumbers
    view = (u.grid.n,) + (1,) * len(u.shape) + u.grid.rshape
    return SpectralField(u.grid, 1j * xi.reshape(view) * u.fourier[None], True)


def divergence(u: SpectralField) -> SpectralField:
    """Contracts the leading component axis: (div M)[...] = sum_l d_l M[l, ...]."""
    if not u.shape or u.shape[0] != u.grid.n:
        raise errors.InvalidInputError(f"divergence of a field of shape {u.shape}")
    xi = u.grid.wavenumbers
    view = (u.grid.n,) + (1,) * (len(u.shape) - 1) + u.grid.rshape
    return SpectralField(u.grid, np.sum(1j * xi.reshape(view) * u.fourier, axis=0), True)


def jacobian(u: SpectralField) -> SpectralField:
    """Du with (Du)[i, l] = d_l u_i."""
    return gradient(u).transpose()


def laplacian(u: SpectralField) -> SpectralField:
    return apply_multiplier(LAPLACIAN, u)


def inverse_laplacian(u: SpectralField) -> SpectralField:
    return apply_multiplier(INVERSE_LAPLACIAN, u)


def gradient_part(u: SpectralField) -> SpectralField:
    """Q u, silently dropping the mean."""
    return apply_multiplier(LERAY_Q, u)


def solenoidal_part(u: SpectralField) -> SpectralField:
    """P u; the mean, if any, is kept."""
    return u - gradient_part(u)


def leray_split(u: SpectralField):
    if not u.shape or u.shape[0] != u.grid.n:
        raise errors.InvalidInputError(f"leray split of a field of shape {u.shape}")
    if not u.mean_excluded and not u.is_mean_zero():
        raise errors.ZeroModeError("leray_split")
    q = gradient_part(u)
    p = SpectralField(u.grid, u.fourier - q.fourier, True)
    return p, q


def lp_magnitude(u: SpectralField) -> np.ndarray:
    values = u.physical
    if not u.shape:
        return np.abs(values)
    return np.sqrt(np.sum(values.reshape((-1,) + u.grid.shape) ** 2, axis=0))


def lp_norm(u: SpectralField, p: float) -> float:
    """Grid quadrature of the L^p norm of the pointwise Euclidean magnitude."""
    magnitude = lp_magnitude(u)
    if math.isinf(p):
        return float(np.max(magnitude))
    return float((np.sum(magnitude ** p) * u.grid.cell_volume) ** (1.0 / p))


def l2_norm_spectral(u: SpectralField) -> float:
    density = np.abs(u.fourier) ** 2 * u.grid.rfft_weights
    return float(math.sqrt(density.sum() * u.grid.volume))


def inner(u: SpectralField, v: SpectralField) -> float:
    u._check(v)
    return float(np.sum(u.physical * v.physical) * u.grid.cell_volume)


def bernstein_check(u: SpectralField, p: float = 2.0):
    """Per-shell ratios ||grad D_j u||_p / (2^j ||D_j u||_p) over the non-empty shells."""
    ratios = {}
    for j, block in dyadic_blocks(u).items():
        size = lp_norm(block, p)
        if size <= 1e-14 * max(1.0, lp_norm(u, p)):
            continue
        ratios[j] = lp_norm(gradient(block), p) / (2.0 ** j * size)
    values = list(ratios.values())
    return {
        "ratios": ratios,
        "lower": min(values) if values else None,
        "upper": max(values) if values else None,
    }


def max_imaginary_residue(u: SpectralField) -> float:
    """Imaginary part of the full complex inverse transform, relative to the field size."""
    full = np.fft.ifftn(
        np.fft.fftn(u.physical, axes=u.grid.axes), axes=u.grid.axes
    )
    scale = max(1.0, float(np.max(np.abs(u.physical), initial=0.0)))
    return float(np.max(np.abs(full.imag), initial=0.0)) / scale


def sample(grid: Grid, fn: Callable[..., np.ndarray], mean_excluded=False) -> SpectralField:
    """Samples ``fn(*x)`` on the grid coordinates."""
    return SpectralField.from_physical(grid, fn(*grid.coordinates()), mean_excluded)


def fourier_mode(
    grid: Grid,
    k: Sequence[int],
    amplitude: float = 1.0,
    phase: float = 0.0,
    direction: Optional[Sequence[float]] = None,
) -> SpectralField:
    """amplitude * cos(k.x + phase), optionally times a constant direction vector."""
    x = grid.coordinates()
    arg = sum(grid.k0 * ki * xi for ki, xi in zip(k, x)) + phase
    values = amplitude * np.cos(arg)
    if direction is not None:
        values = np.asarray(direction, dtype=float).reshape((-1,) + (1,) * grid.n) * values
    return SpectralField.from_physical(grid, values, True)
