import dataclasses
import logging
import math
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.sparse import linalg as sparse_linalg

from spectral_ins import besov
from spectral_ins import constants
from spectral_ins import errors
from spectral_ins import reports
from spectral_ins import spectral

logger = logging.getLogger(__name__)

METHOD_NEUMANN = "neumann"
METHOD_RELAXED = "relaxed"
METHOD_CG = "cg"
METHOD_GMRES = "gmres"
METHOD_DENSE = "dense"


@dataclasses.dataclass(frozen=True, eq=False)
class CoefficientField:
    """Scalar coefficient a with its mean a_bar and bounds a_lower <= a <= a_upper."""

    values: spectral.SpectralField
    bar: float
    lower: float
    upper: float

    def __post_init__(self):
        if self.values.shape:
            raise errors.InvalidInputError(f"coefficient must be scalar, got shape {self.values.shape}")
        if not 0 < self.lower <= self.upper:
            raise errors.InvalidInputError(
                f"coefficient bounds must satisfy 0 < lower <= upper, got {self.lower}, {self.upper}"
            )
        samples = self.values.physical
        slack = 1e-10 * self.upper
        if np.min(samples) < self.lower - slack or np.max(samples) > self.upper + slack:
            raise errors.InvalidInputError(
                f"coefficient samples in [{np.min(samples):.6g}, {np.max(samples):.6g}]"
                f" leave the bounds [{self.lower:.6g}, {self.upper:.6g}]"
            )

    @classmethod
    def from_values(cls, values: spectral.SpectralField, lower=None, upper=None):
        samples = values.physical
        lower = float(np.min(samples)) if lower is None else lower
        upper = float(np.max(samples)) if upper is None else upper
        return cls(values, float(values.mean), lower, upper)

    @classmethod
    def constant(cls, grid, value):
        return cls(spectral.SpectralField.constant(grid, value), value, value, value)

    @property
    def grid(self):
        return self.values.grid

    @property
    def deviation(self) -> spectral.SpectralField:
        return self.values.without_mean()

    def is_constant(self) -> bool:
        return self.values.is_constant()

    def reciprocal(self) -> "CoefficientField":
        inverse = spectral.apply_pointwise(self.values, lambda x: 1.0 / x)
        return CoefficientField.from_values(inverse, 1.0 / self.upper, 1.0 / self.lower)


@dataclasses.dataclass(frozen=True, eq=False)
class PressureSolution:
    gradP: spectral.SpectralField
    residual: float
    iterations: int
    contraction_estimate: float
    method: str = METHOD_NEUMANN

    def to_dict(self):
        return {
            "residual": self.residual,
            "iterations": self.iterations,
            "contraction_estimate": self.contraction_estimate,
            "method": self.method,
        }


def flux(a: CoefficientField, gradP: spectral.SpectralField) -> spectral.SpectralField:
    """a grad P as a collocation product."""
    return spectral.multiply(a.values, gradP, dealias=False)


def apply_operator(a: CoefficientField, gradP) -> spectral.SpectralField:
    """div(a grad P)."""
    return spectral.divergence(flux(a, gradP))


def relative_residual(a, gradP, f) -> float:
    target = spectral.l2_norm_spectral(spectral.divergence(f))
    gap = spectral.l2_norm_spectral(apply_operator(a, gradP) - spectral.divergence(f))
    return gap / target if target > 0 else gap


def _check_data(a: CoefficientField, f: spectral.SpectralField):
    a.values._check(f)
    if f.shape != (f.grid.n,):
        raise errors.InvalidInputError(f"pressure forcing must be a vector field, got {f.shape}")
    if not f.is_mean_zero():
        raise errors.ZeroModeError("solve_pressure")


def _neumann(a, f, tol, max_iter):
    """grad P <- grad P + (omega / a_bar) Q(f - a grad P), starting from zero.

    omega is 1 until the residual grows, then a_lower / a_upper. Returns
    None when the measured contraction passes the fallback threshold.
    """
    divergence_norm = spectral.l2_norm_spectral(spectral.divergence(f))
    gradP = spectral.SpectralField.zeros(f.grid, (f.grid.n,))
    omega = 1.0
    method = METHOD_NEUMANN
    previous = None
    contraction = 0.0
    for k in range(1, max_iter + 2):
        update = spectral.gradient_part(f - flux(a, gradP))
        residual = spectral.l2_norm_spectral(spectral.divergence(update)) / divergence_norm
        size = spectral.l2_norm_spectral(update)
        if previous is not None and previous > 0:
            contraction = size / previous
        if k > 1 and residual <= tol:
            return PressureSolution(gradP, residual, k - 1, contraction, method)
        if k > 3 and contraction > 1.0 and omega == 1.0:
            omega = a.lower / a.upper
            method = METHOD_RELAXED
            logger.info(f"neumann iteration diverging ({contraction:.3f}), relaxing with omega={omega:.3f}")
            previous = None
            contraction = 0.0
            continue
        if k > 5 and contraction > constants.ELLIPTIC_FALLBACK_CONTRACTION:
            logger.info(f"neumann contraction {contraction:.3f} too slow, switching to krylov")
            return None
        previous = size
        gradP = gradP + update * (omega / a.bar)
    logger.warning(f"neumann iteration hit max_iter={max_iter} at residual {residual:.3e}")
    return None


def _flatten(field: spectral.SpectralField):
    return field.physical.reshape(-1)


def _potential(grid, vector):
    return spectral.SpectralField.from_physical(grid, vector.reshape(grid.shape), True)


def _krylov(a, f, tol, max_iter):
    grid = f.grid
    size = grid.points

    def matvec(x):
        return -_flatten(apply_operator(a, spectral.gradient(_potential(grid, x))))

    inverse = np.zeros(grid.rshape)
    resolved = grid.k_squared > 0
    inverse[resolved] = 1.0 / (a.bar * grid.k_squared[resolved])

    def precondition(x):
        field = _potential(grid, x)
        return _flatten(field.with_fourier(field.fourier * inverse))

    operator = sparse_linalg.LinearOperator((size, size), matvec=matvec, dtype=float)
    preconditioner = sparse_linalg.LinearOperator((size, size), matvec=precondition, dtype=float)
    rhs = -_flatten(spectral.divergence(f))
    iterations = {"count": 0}

    def count(_):
        iterations["count"] += 1

    x, info = sparse_linalg.cg(
        operator, rhs, rtol=tol * 0.1, maxiter=max_iter, M=preconditioner, callback=count
    )
    gradP = spectral.gradient(_potential(grid, x))
    residual = relative_residual(a, gradP, f)
    method = METHOD_CG
    if residual > tol:
        logger.info(f"cg stopped at residual {residual:.3e} (info={info}), trying gmres")
        x, info = sparse_linalg.gmres(
            operator, rhs, x0=x, rtol=tol * 0.1, maxiter=max_iter, M=preconditioner
        )
        gradP = spectral.gradient(_potential(grid, x))
        residual = relative_residual(a, gradP, f)
        method = METHOD_GMRES
    if residual > tol:
        raise errors.EllipticStagnation(residual, iterations["count"])
    return PressureSolution(gradP, residual, iterations["count"], math.nan, method)


def solve_pressure(
    a: CoefficientField,
    f: spectral.SpectralField,
    tol: float = constants.DEFAULT_TOLERANCE,
    max_iter: int = constants.ELLIPTIC_MAX_ITER,
    method: str = "auto",
) -> PressureSolution:
    """grad P with div(a grad P) = div f; only the gradient is represented."""
    if not tol > 0:
        raise errors.InvalidInputError(f"tolerance must be positive, got {tol}")
    _check_data(a, f)
    gradient_size = spectral.l2_norm_spectral(spectral.gradient_part(f))
    if gradient_size <= constants.REALITY_TOLERANCE * spectral.l2_norm_spectral(f):
        return PressureSolution(spectral.SpectralField.zeros(f.grid, (f.grid.n,)), 0.0, 0, 0.0)
    if method == METHOD_DENSE:
        return dense_pressure_solve(a, f)
    if method != "krylov":
        solution = _neumann(a, f, tol, max_iter)
        if solution is not None:
            logger.debug(f"pressure solve: {solution.to_dict()}")
            return solution
    return _krylov(a, f, tol, max_iter)


def _operator_columns(a, grid, start, stop):
    basis = np.zeros((stop - start, grid.points))
    basis[np.arange(stop - start), np.arange(start, stop)] = 1.0
    potentials = spectral.SpectralField.from_physical(
        grid, basis.reshape((stop - start,) + grid.shape)
    )
    operator = spectral.divergence(flux(a, spectral.gradient(potentials)))
    resolved = potentials.with_fourier(
        potentials.fourier * _resolved_modes(grid), mean_excluded=True
    )
    return (potentials.physical - resolved.physical - operator.physical).reshape(stop - start, -1)


def _resolved_modes(grid):
    mask = ~grid.nyquist_mask
    mask[(0,) * grid.n] = False
    return mask


def dense_pressure_solve(a: CoefficientField, f: spectral.SpectralField, chunk=256) -> PressureSolution:
    """Assemble -L + (Id - Pi) on grid samples of P and solve it by dense LU.

    L is div(a grad .) and Pi the projector on the non-constant, non-Nyquist
    modes, so the assembled matrix is invertible and the solution has no
    component in the kernel of L.
    """
    _check_data(a, f)
    grid = f.grid
    size = grid.points
    logger.info(f"assembling dense {size}x{size} pressure operator")
    matrix = np.empty((size, size))
    for start in range(0, size, chunk):
        stop = min(start + chunk, size)
        # rows of the block are the images of unit samples, i.e. columns of the matrix
        matrix[:, start:stop] = _operator_columns(a, grid, start, stop).T
    rhs = -_flatten(spectral.divergence(f))
    x = linalg.lu_solve(linalg.lu_factor(matrix), rhs)
    gradP = spectral.gradient(_potential(grid, x))
    return PressureSolution(gradP, relative_residual(a, gradP, f), 1, 0.0, METHOD_DENSE)


def l2_bound_check(a: CoefficientField, f, solution: PressureSolution, seed=None):
    lhs = a.lower * spectral.l2_norm_spectral(solution.gradP)
    rhs = spectral.l2_norm_spectral(spectral.gradient_part(f))
    passed = lhs <= (1 + constants.L2_BOUND_SLACK) * rhs
    if not passed:
        logger.warning(f"l2 pressure bound violated: {lhs:.6e} > {rhs:.6e}")
    return reports.report(
        "pressure_l2",
        reports.ratio(lhs, rhs),
        passed,
        grid=f.grid,
        seed=seed,
        parameters={"a_bar": a.bar, "a_lower": a.lower, "a_upper": a.upper},
        details={"lhs": lhs, "rhs": rhs},
    )


def regime_admissible(regime, n, p, q) -> bool:
    if not 1 <= q < math.inf:
        return False
    if regime == constants.REGIME_LOW_P:
        lower = 6 / 5 if n == 3 else 1.0
        return lower < p < 2 and 1 / p - 1 / q <= 0.5
    if regime == constants.REGIME_HIGH_P:
        upper = 6.0 if n == 3 else math.inf
        return 2 < p < upper and 1 / p + 1 / q >= 0.5
    return False


def besov_prefactor(a: CoefficientField, q) -> float:
    """(1/a_bar + ||1/a - 1/a_bar||) (1 + ||a - a_bar|| / a_lower) in B^{n/q}_{q,1}."""
    n = a.grid.n
    idx = besov.BesovIndex(n / q, q, 1)
    reciprocal = spectral.apply_pointwise(a.values, lambda x: 1.0 / x)
    return (1.0 / a.bar + besov.besov_norm(reciprocal, idx)) * (
        1.0 + besov.besov_norm(a.deviation, idx) / a.lower
    )


def besov_bound_check(a: CoefficientField, f, solution: PressureSolution, regime, p, q, seed=None):
    n = f.grid.n
    if not regime_admissible(regime, n, p, q):
        raise errors.InvalidIndexError(f"invalid regime {regime} for n={n}, p={p}, q={q}")
    idx = besov.BesovIndex(n / p - n / 2, p, 2)
    lhs = besov.besov_norm(solution.gradP, idx)
    prefactor = besov_prefactor(a, q)
    rhs = prefactor * besov.besov_norm(spectral.gradient_part(f), idx)
    constant = reports.ratio(lhs, rhs)
    return reports.report(
        f"pressure_besov_{regime}",
        constant,
        constant is None or math.isfinite(constant),
        grid=f.grid,
        seed=seed,
        parameters={"regime": regime, "p": p, "q": q, "index": idx.to_dict()},
        details={"lhs": lhs, "rhs": rhs, "prefactor": prefactor},
    )


def _blockwise_pairing(u, v):
    partition = spectral.build_partition(u.grid)
    total = 0.0
    for j in partition.indices:
        total += spectral.inner(
            u.with_fourier(u.fourier * partition.mask(j)),
            v.with_fourier(v.fourier * partition.neighbour_mask(j)),
        )
    return total


def self_adjointness_check(rho: spectral.SpectralField, u, v, seed=None):
    """sum_j <D_j(rho u), D'_j v> against sum_j <D_j u, D'_j(rho v)> for band-limited u, v."""
    u = spectral.band_limit(u).without_mean()
    v = spectral.band_limit(v).without_mean()
    left = _blockwise_pairing(spectral.multiply(rho, u, dealias=False), v)
    right = _blockwise_pairing(u, spectral.multiply(rho, v, dealias=False))
    plain = spectral.inner(spectral.multiply(rho, u, dealias=False), v)
    scale = max(abs(left), abs(right), 1e-300)
    defect = abs(left - right) / scale
    return reports.report(
        "self_adjointness",
        defect,
        defect <= constants.DEFAULT_TOLERANCE,
        grid=u.grid,
        seed=seed,
        details={"left": left, "right": right, "plain": plain},
    )


def duality_uniqueness_check(a: CoefficientField, f, solution: PressureSolution, psi, tol=constants.DEFAULT_TOLERANCE, seed=None):
    """<grad P, psi> = <Q f, grad P_psi> with grad P_psi solving div(a grad P_psi) = div psi."""
    dual = solve_pressure(a, psi.without_mean(), tol)
    left = spectral.inner(solution.gradP, psi)
    right = spectral.inner(spectral.gradient_part(f), dual.gradP)
    scale = max(abs(left), abs(right))
    defect = abs(left - right) / scale if scale > 0 else 0.0
    return reports.report(
        "duality_uniqueness",
        defect,
        defect <= 1e-8,
        grid=f.grid,
        seed=seed,
        details={"left": left, "right": right, "dual_iterations": dual.iterations},
    )


def neumann_contraction(a: CoefficientField, rng=None, iterations=50) -> float:
    """Power-iteration estimate of the spectral radius of G -> Q((a - a_bar) G) / a_bar on gradients."""
    if a.is_constant():
        return 0.0
    from spectral_ins import random_fields

    rng = random_fields.generator(0) if rng is None else rng
    gradient = spectral.gradient(random_fields.band_limited(a.grid, rng))
    factor = 0.0
    for _ in range(iterations):
        size = spectral.l2_norm_spectral(gradient)
        if size == 0.0:
            return 0.0
        gradient = gradient / size
        gradient = spectral.gradient_part(
            spectral.multiply(a.deviation, gradient, dealias=False)
        ) / a.bar
        factor = spectral.l2_norm_spectral(gradient)
    return factor


def contraction_sweep(grid, bar, oscillations, seed=0, shells=None):
    """Contraction factor per oscillation amplitude and the largest amplitude that still contracts.

    Amplitudes whose coefficient is not positive everywhere are reported with
    ``admissible`` false and no contraction factor.
    """
    from spectral_ins import random_fields

    rows = []
    largest: Optional[float] = None
    for oscillation in oscillations:
        values = random_fields.coefficient_values(
            grid, random_fields.generator(seed), bar, oscillation, shells=shells
        )
        lower = float(np.min(values.physical))
        if not lower > 0:
            logger.warning(f"oscillation {oscillation} gives min a = {lower:.3e}; skipping the sweep row")
            rows.append({"oscillation": oscillation, "contraction": None, "admissible": False, "lower": lower})
            continue
        factor = neumann_contraction(CoefficientField.from_values(values))
        rows.append({"oscillation": oscillation, "contraction": factor, "admissible": True, "lower": lower})
        if factor < 1.0 and (largest is None or oscillation > largest):
            largest = oscillation
    return {
        "rows": rows,
        "largest_contracting_oscillation": largest,
        "admissible": all(row["admissible"] for row in rows),
    }
