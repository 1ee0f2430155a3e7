import dataclasses
import itertools
import logging
import math
from typing import List, Optional

import numpy as np
from scipy import integrate

from spectral_ins import besov
from spectral_ins import constants
from spectral_ins import errors
from spectral_ins import reports
from spectral_ins import snapshots
from spectral_ins import spectral
from spectral_ins import stokes

logger = logging.getLogger(__name__)

METHOD_DIRECT = "direct"
METHOD_TAYLOR = "taylor"
POINT_CHUNK = 2 ** 22
INVERSE_MAX_ITER = 200
IDENTITY_TOLERANCE = 1e-10
ROUND_TRIP_TOLERANCE = 1e-8
TRANSPORT_TOLERANCE = 1e-5


def _matrix_values(field: spectral.SpectralField) -> np.ndarray:
    """Physical samples with the two component axes moved last."""
    return np.moveaxis(field.physical, (0, 1), (-2, -1))


def _matrix_field(grid, values) -> spectral.SpectralField:
    return spectral.SpectralField.from_physical(grid, np.moveaxis(values, (-2, -1), (0, 1)))


def _displacement_values(grid, displacement) -> np.ndarray:
    if isinstance(displacement, spectral.SpectralField):
        return displacement.physical
    values = np.asarray(displacement, dtype=float)
    if values.shape != (grid.n,) + grid.shape:
        raise errors.InvalidInputError(f"displacement samples of shape {values.shape} on {grid}")
    return values


@dataclasses.dataclass(frozen=True, eq=False)
class FlowState:
    """X(t, y) = y + X[y] with A = (DX)^{-1} and det DX sampled on the grid."""

    X: spectral.SpectralField
    A: spectral.SpectralField
    detDX: spectral.SpectralField
    t: float
    smallness: Optional[float] = None

    @classmethod
    def from_displacement(cls, displacement: spectral.SpectralField, t, smallness=None) -> "FlowState":
        grid = displacement.grid
        if displacement.shape != (grid.n,):
            raise errors.InvalidInputError(f"displacement must be a vector field, got {displacement.shape}")
        jacobian = spectral.jacobian(displacement)
        deviation = float(np.max(spectral.lp_magnitude(jacobian)))
        if deviation >= 1.0:
            raise errors.FlowNotInvertible(deviation)
        DX = _matrix_values(spectral.identity_matrix(grid) + jacobian)
        A = np.linalg.inv(DX)
        det = np.linalg.det(DX)
        return cls(
            displacement,
            _matrix_field(grid, A),
            spectral.SpectralField.from_physical(grid, det),
            float(t),
            smallness,
        )

    @classmethod
    def identity(cls, grid, t=0.0) -> "FlowState":
        return cls.from_displacement(spectral.SpectralField.zeros(grid, (grid.n,)), t, 0.0)

    @property
    def grid(self) -> spectral.Grid:
        return self.X.grid

    @property
    def DX(self) -> spectral.SpectralField:
        return spectral.identity_matrix(self.grid) + spectral.jacobian(self.X)

    @property
    def deviation(self) -> float:
        """Grid max of |DX - Id| (Frobenius)."""
        return float(np.max(spectral.lp_magnitude(spectral.jacobian(self.X))))

    def inversion_defect(self) -> float:
        A = _matrix_values(self.A)
        DX = _matrix_values(self.DX)
        identity = np.eye(self.grid.n)
        left = np.max(np.abs(A @ DX - identity))
        right = np.max(np.abs(DX @ A - identity))
        return float(max(left, right))

    def determinant_defect(self) -> float:
        return float(np.max(np.abs(self.detDX.physical - 1.0)))


def flow_smallness(v: stokes.TimeSeries, p=2.0) -> np.ndarray:
    """Running int_0^t ||grad v||_{B^{n/p}_{p,1}} at every stored time."""
    density = besov.BesovIndex.density(v.grid.n, p)
    norms = v.norms(lambda field: besov.besov_norm(spectral.jacobian(field), density))
    if len(v) < 2:
        return np.zeros(len(v))
    return integrate.cumulative_trapezoid(norms, v.times, initial=0.0)


def flow_trajectory(v: stokes.TimeSeries, p=2.0, alpha=constants.ALPHA) -> List[FlowState]:
    """Flow at every stored time, X integrated by the trapezoid rule in the labels y."""
    grid = v.grid
    if v.shape != (grid.n,):
        raise errors.InvalidInputError(f"flow needs a vector velocity, got shape {v.shape}")
    stacked = np.stack([field.fourier for field in v])
    if len(v) > 1:
        displacements = integrate.cumulative_trapezoid(stacked, v.times, axis=0, initial=0.0)
    else:
        displacements = np.zeros_like(stacked)
    smallness = flow_smallness(v, p)
    if smallness[-1] > alpha:
        logger.warning(
            f"velocity gradient integral {smallness[-1]:.3e} exceeds the smallness gate {alpha:.3e}"
        )
    return [
        FlowState.from_displacement(spectral.SpectralField(grid, values), t, float(small))
        for values, t, small in zip(displacements, v.times, smallness)
    ]


def flow_from_velocity(v: stokes.TimeSeries, t=None, p=2.0, alpha=constants.ALPHA) -> FlowState:
    if t is None:
        t = v.times[-1]
    matches = np.flatnonzero(np.isclose(v.times, t, rtol=0, atol=1e-12))
    if matches.size == 0:
        raise errors.InvalidInputError(f"t={t} is not a sample time of the velocity")
    k = int(matches[0])
    truncated = stokes.TimeSeries(v.times[: k + 1], v.fields[: k + 1])
    return flow_trajectory(truncated, p, alpha)[-1]


@dataclasses.dataclass(frozen=True)
class Composition:
    values: np.ndarray
    method: str
    accuracy: float


def _direct_values(field: spectral.SpectralField, displacement: np.ndarray) -> np.ndarray:
    grid = field.grid
    positions = (grid.coordinates() + displacement).reshape(grid.n, -1).T
    k = grid.wavenumbers.reshape(grid.n, -1)
    coefficients = (field.fourier * grid.rfft_weights).reshape(-1, k.shape[1])
    chunk = max(1, POINT_CHUNK // k.shape[1])
    out = np.empty((coefficients.shape[0], positions.shape[0]))
    for start in range(0, positions.shape[0], chunk):
        phase = np.exp(1j * (positions[start : start + chunk] @ k))
        out[:, start : start + chunk] = (phase @ coefficients.T).T.real
    return out.reshape(field.shape + grid.shape)


def _taylor_values(field: spectral.SpectralField, displacement: np.ndarray, order: int):
    grid = field.grid
    values = field.physical.copy()
    last = 0.0
    for m in range(1, order + 1):
        term = np.zeros_like(values)
        for combo in itertools.combinations_with_replacement(range(grid.n), m):
            alpha = np.bincount(combo, minlength=grid.n)
            symbol = np.ones(grid.rshape, dtype=complex)
            weight = np.ones(grid.shape)
            for l, power in enumerate(alpha):
                if power:
                    symbol = symbol * (1j * grid.wavenumbers[l]) ** power
                    weight = weight * displacement[l] ** power / math.factorial(power)
            derivative = spectral.SpectralField(grid, field.fourier * symbol).physical
            term += weight * derivative
        values += term
        last = float(np.max(np.abs(term), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(field.physical), initial=0.0)))
    return values, last / scale


def interpolate(
    field: spectral.SpectralField,
    displacement,
    order=constants.TAYLOR_ORDER,
    budget=constants.DIRECT_INTERPOLATION_BUDGET,
) -> Composition:
    """Samples of the trigonometric interpolant of ``field`` at y + displacement(y)."""
    grid = field.grid
    values = _displacement_values(grid, displacement)
    if grid.points * int(np.prod(grid.rshape)) <= budget:
        return Composition(_direct_values(field, values), METHOD_DIRECT, 0.0)
    result, accuracy = _taylor_values(field, values, order)
    return Composition(result, METHOD_TAYLOR, accuracy)


def compose(
    field: spectral.SpectralField,
    displacement,
    order=constants.TAYLOR_ORDER,
    budget=constants.DIRECT_INTERPOLATION_BUDGET,
    tolerance=TRANSPORT_TOLERANCE,
) -> spectral.SpectralField:
    """field o (Id + displacement)."""
    composition = interpolate(field, displacement, order, budget)
    if composition.accuracy > tolerance:
        logger.warning(
            f"{composition.method} interpolation accuracy {composition.accuracy:.3e} above {tolerance:.1e}"
        )
    return spectral.SpectralField.from_physical(field.grid, composition.values)


@dataclasses.dataclass(frozen=True, eq=False)
class InverseFlow:
    """X^{-1}(x) = x + displacement(x)."""

    displacement: spectral.SpectralField
    iterations: int
    defect: float
    t: float


def inverse_flow(
    flow: FlowState, tol=constants.INVERSE_FLOW_TOLERANCE, max_iter=INVERSE_MAX_ITER
) -> InverseFlow:
    """Damped fixed point y <- y - beta (y + X(y) - x) for every grid point x."""
    if flow.deviation >= 1.0:
        raise errors.FlowNotInvertible(flow.deviation)
    eta = -flow.X.physical
    beta = 1.0
    previous = math.inf
    defect = math.inf
    for iteration in range(1, max_iter + 1):
        residual = eta + interpolate(flow.X, eta).values
        defect = float(np.max(np.abs(residual), initial=0.0))
        if defect <= tol:
            logger.debug(f"inverse flow at t={flow.t}: defect {defect:.3e} after {iteration} iterations")
            return InverseFlow(
                spectral.SpectralField.from_physical(flow.grid, eta), iteration, defect, flow.t
            )
        if defect >= previous:
            beta /= 2
        previous = defect
        eta = eta - beta * residual
    raise errors.InverseStagnation(defect, max_iter)


def round_trip_check(flow: FlowState, inverse: InverseFlow, seed=None):
    """max |X^{-1}(X(y)) - y| over the grid."""
    back = interpolate(inverse.displacement, flow.X).values
    defect = float(np.max(np.abs(back + flow.X.physical), initial=0.0))
    return reports.report(
        "flow_round_trip",
        defect,
        defect <= ROUND_TRIP_TOLERANCE,
        grid=flow.grid,
        seed=seed,
        parameters={"t": flow.t},
        details={"inverse_iterations": inverse.iterations, "inverse_defect": inverse.defect},
    )


def transported_divergence(A: spectral.SpectralField, u: spectral.SpectralField) -> spectral.SpectralField:
    """div(A u) with (A u)_j = sum_i A_ji u_i."""
    return spectral.divergence(spectral.einsum("ji,i->j", A, u, dealias=False))


def transported_gradient(A: spectral.SpectralField, K: spectral.SpectralField) -> spectral.SpectralField:
    """div(A K): the leading index of A is differentiated."""
    return spectral.divergence(spectral.multiply(K, A, dealias=False))


def transported_operators(
    H: spectral.SpectralField, K: spectral.SpectralField, flow: FlowState, tol=TRANSPORT_TOLERANCE, seed=None,
    order=constants.TAYLOR_ORDER,
):
    """(grad K) o X = div(A K o X) and (div H) o X = div(A H o X) on a measure-preserving flow."""
    determinant = flow.determinant_defect()
    if determinant > constants.DETERMINANT_TOLERANCE:
        logger.warning(f"flow is not measure preserving: max |det DX - 1| = {determinant:.3e}")
    grad_left = interpolate(spectral.gradient(K), flow.X, order)
    grad_right = transported_gradient(flow.A, compose(K, flow.X, order)).physical
    div_left = interpolate(spectral.divergence(H), flow.X, order)
    div_right = transported_divergence(flow.A, compose(H, flow.X, order)).physical
    gradient_defect = float(np.max(np.abs(grad_left.values - grad_right)))
    divergence_defect = float(np.max(np.abs(div_left.values - div_right)))
    defect = max(gradient_defect, divergence_defect)
    return reports.report(
        "transported_operators",
        defect,
        defect <= tol,
        grid=flow.grid,
        seed=seed,
        parameters={"t": flow.t, "tolerance": tol},
        details={
            "gradient_defect": gradient_defect,
            "divergence_defect": divergence_defect,
            "determinant_defect": determinant,
            "interpolation": grad_left.method,
            "interpolation_accuracy": max(grad_left.accuracy, div_left.accuracy),
        },
    )


def flow_invariants_check(flow: FlowState, tol=constants.DEFAULT_TOLERANCE, seed=None):
    """A DX = DX A = Id and, for constrained flows, det DX = 1."""
    inversion = flow.inversion_defect()
    determinant = flow.determinant_defect()
    bound = max(constants.DETERMINANT_TOLERANCE, 100 * tol)
    return reports.report(
        "flow_invariants",
        determinant,
        inversion <= IDENTITY_TOLERANCE and determinant <= bound,
        grid=flow.grid,
        seed=seed,
        parameters={"t": flow.t, "tol": tol},
        details={"inversion_defect": inversion, "determinant_bound": bound, "deviation": flow.deviation},
    )


def inverse_rate(flow: FlowState, v: spectral.SpectralField) -> spectral.SpectralField:
    """d_t A = -A Dv A."""
    return -spectral.einsum("ij,jk,kl->il", flow.A, spectral.jacobian(v), flow.A, dealias=False)


def _ratio_over_time(lhs, rhs):
    """max_t lhs/rhs over the times where either side is nonzero."""
    measured = None
    for left, right in zip(lhs, rhs):
        value = reports.ratio(left, right)
        if value is not None:
            measured = value if measured is None else max(measured, value)
    return measured


def _l2_in_time(times, values):
    return math.sqrt(stokes.time_integral(times, np.square(values)))


def _bound_report(estimate_id, lhs, rhs, grid, seed, p, details=None):
    measured = _ratio_over_time(lhs, rhs)
    return reports.report(
        estimate_id,
        measured,
        measured is None or math.isfinite(measured),
        grid=grid,
        seed=seed,
        parameters={"p": p},
        details=dict(details or {}, lhs=list(lhs), rhs=list(rhs)),
    )


def stability_bounds_check(v1: stokes.TimeSeries, v2: stokes.TimeSeries, p=2.0, alpha=constants.ALPHA, seed=None):
    """Measured constants of the flow-inverse bounds and of their stability in the velocity."""
    v1._check(v2)
    grid = v1.grid
    times = v1.times
    n = grid.n
    density = besov.BesovIndex.density(n, p)
    velocity = besov.BesovIndex.velocity(n, p)
    first = flow_trajectory(v1, p, alpha)
    second = flow_trajectory(v2, p, alpha)
    identity = spectral.identity_matrix(grid)
    rates1 = [inverse_rate(flow, v) for flow, v in zip(first, v1)]
    rates2 = [inverse_rate(flow, v) for flow, v in zip(second, v2)]
    grad1 = [spectral.jacobian(v) for v in v1]
    delta = [spectral.jacobian(a - b) for a, b in zip(v1, v2)]

    deviation = [besov.besov_norm(identity - flow.A, density) for flow in first]
    smallness = [flow.smallness for flow in first]
    rate_low = [besov.besov_norm(rate, velocity) for rate in rates1]
    grad_low = [besov.besov_norm(g, velocity) for g in grad1]
    rate = [besov.besov_norm(r, density) for r in rates1]
    grad = [besov.besov_norm(g, density) for g in grad1]

    difference = max(besov.besov_norm(a.A - b.A, density) for a, b in zip(first, second))
    delta_density = [besov.besov_norm(d, density) for d in delta]
    delta_velocity = [besov.besov_norm(d, velocity) for d in delta]
    rate_gap = [besov.besov_norm(a - b, density) for a, b in zip(rates1, rates2)]
    rate_gap_low = [besov.besov_norm(a - b, velocity) for a, b in zip(rates1, rates2)]
    integral = stokes.time_integral(times, delta_density)
    rate_gap_l2 = _l2_in_time(times, rate_gap_low)
    delta_l2 = _l2_in_time(times, delta_velocity)

    return [
        _bound_report("inverse_deviation", deviation, smallness, grid, seed, p),
        _bound_report("inverse_rate_low", rate_low, grad_low, grid, seed, p),
        _bound_report("inverse_rate", rate, grad, grid, seed, p),
        _bound_report("inverse_difference", [difference], [integral], grid, seed, p),
        _bound_report(
            "inverse_rate_difference", [stokes.time_integral(times, rate_gap)], [integral], grid, seed, p
        ),
        _bound_report("inverse_rate_difference_low", [rate_gap_l2], [delta_l2], grid, seed, p),
    ]


def composition_bound_check(
    a: spectral.SpectralField, flow: FlowState, s, p=2.0, order=constants.TAYLOR_ORDER, seed=None
):
    """||a o X||_{B^s_{p,1}} / ||a||_{B^s_{p,1}}; s >= 1 also records ||DX - Id||_{B^{n/p}_{p,1}}."""
    n = a.grid.n
    if not -n / besov.conjugate(p) < s <= n / p:
        raise errors.InvalidIndexError(f"composition needs -n/p' < s <= n/p, got s={s}, p={p}")
    idx = besov.BesovIndex(s, p, 1)
    before = besov.besov_norm(a, idx)
    after = besov.besov_norm(compose(a, flow.X, order), idx)
    measured = reports.ratio(after, before)
    details = {"before": before, "after": after, "case": "fractional" if 0 < s < 1 else "regular"}
    if s >= 1:
        details["jacobian_deviation"] = besov.besov_norm(
            spectral.jacobian(flow.X), besov.BesovIndex.density(n, p)
        )
    return reports.report(
        "composition_bound",
        measured,
        measured is None or math.isfinite(measured),
        grid=a.grid,
        seed=seed,
        parameters={"s": s, "p": p, "t": flow.t},
        details=details,
    )


def flow_to_snapshot(path, flow: FlowState):
    """Displacement, A (row-major) and det DX as components of one snapshot."""
    grid = flow.grid
    samples = np.concatenate(
        [
            flow.X.physical,
            flow.A.physical.reshape((grid.n * grid.n,) + grid.shape),
            flow.detDX.physical[None],
        ]
    )
    snapshots.write(path, grid, samples)


def flow_from_snapshot(path, t=0.0) -> FlowState:
    grid, samples = snapshots.read(path)
    if samples.shape[0] != grid.n + grid.n * grid.n + 1:
        raise errors.InvalidInputError(f"{path} does not hold a flow snapshot")
    return FlowState.from_displacement(spectral.SpectralField.from_physical(grid, samples[: grid.n]), t)
