import dataclasses
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate

from spectral_ins import besov
from spectral_ins import constants
from spectral_ins import elliptic
from spectral_ins import errors
from spectral_ins import reports
from spectral_ins import spectral

logger = logging.getLogger(__name__)

PHI_SERIES_RADIUS = 1e-2
CONSTRAINT_TOLERANCE = 1e-10
METHOD_CONSTANT = "constant"
METHOD_PERTURBED = "perturbed"
METHOD_THETA = "theta"
METHOD_HOMOTOPY = "homotopy"


def time_grid(T, dt) -> np.ndarray:
    if not T > 0 or not dt > 0 or dt > T:
        raise errors.InvalidInputError(f"need 0 < dt <= T, got dt={dt}, T={T}")
    steps = max(1, int(round(T / dt)))
    return np.linspace(0.0, T, steps + 1)


@dataclasses.dataclass(frozen=True, eq=False)
class TimeSeries:
    """Fields of one shape sampled at increasing times."""

    times: np.ndarray
    fields: Sequence[spectral.SpectralField]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        fields = tuple(self.fields)
        if len(times) != len(fields) or not fields:
            raise errors.InvalidInputError(
                f"time series needs one field per time, got {len(fields)} fields and {len(times)} times"
            )
        if np.any(np.diff(times) <= 0):
            raise errors.InvalidInputError("time series times must increase")
        for field in fields[1:]:
            fields[0]._check(field)
            if field.shape != fields[0].shape:
                raise errors.InvalidInputError(
                    f"time series mixes shapes {fields[0].shape} and {field.shape}"
                )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "fields", fields)

    @classmethod
    def sample(cls, fn: Callable[[float], spectral.SpectralField], times):
        return cls(times, [fn(float(t)) for t in times])

    @classmethod
    def zeros(cls, grid, times, shape=()):
        zero = spectral.SpectralField.zeros(grid, shape)
        return cls(times, [zero] * len(times))

    @property
    def grid(self) -> spectral.Grid:
        return self.fields[0].grid

    @property
    def shape(self):
        return self.fields[0].shape

    @property
    def final(self) -> spectral.SpectralField:
        return self.fields[-1]

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, k) -> spectral.SpectralField:
        return self.fields[k]

    def __iter__(self):
        return iter(self.fields)

    def _stacked(self) -> np.ndarray:
        return np.stack([field.fourier for field in self.fields])

    def _from_stacked(self, values, mean_excluded=False) -> "TimeSeries":
        return TimeSeries(
            self.times,
            [spectral.SpectralField(self.grid, v, mean_excluded) for v in values],
        )

    def _check(self, other: "TimeSeries"):
        if len(self) != len(other) or not np.allclose(self.times, other.times, rtol=0, atol=1e-14):
            raise errors.InvalidInputError("time series sampled at different times")

    def map(self, fn: Callable[[spectral.SpectralField], spectral.SpectralField]) -> "TimeSeries":
        return TimeSeries(self.times, [fn(field) for field in self.fields])

    def __add__(self, other):
        if isinstance(other, TimeSeries):
            self._check(other)
            return TimeSeries(self.times, [u + v for u, v in zip(self.fields, other.fields)])
        return self.map(lambda u: u + other)

    def __neg__(self):
        return self.map(lambda u: -u)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return self.map(lambda u: u * scalar)

    __rmul__ = __mul__

    def derivative(self) -> "TimeSeries":
        """Second-order finite differences in time (first order with only two samples)."""
        if len(self) < 2:
            raise errors.InvalidInputError("time derivative needs at least two samples")
        edge_order = 2 if len(self) >= 3 else 1
        values = np.gradient(self._stacked(), self.times, axis=0, edge_order=edge_order)
        return self._from_stacked(values)

    def integral(self) -> spectral.SpectralField:
        """Trapezoid rule over the whole window."""
        values = integrate.trapezoid(self._stacked(), self.times, axis=0)
        return spectral.SpectralField(self.grid, values)

    def norms(self, norm: Callable[[spectral.SpectralField], float]) -> np.ndarray:
        return np.array([norm(field) for field in self.fields])


def time_integral(times, values) -> float:
    if len(times) < 2:
        return 0.0
    return float(integrate.trapezoid(np.asarray(values, dtype=float), times))


@dataclasses.dataclass(frozen=True, eq=False)
class StokesData:
    """Initial velocity, forcing f and constraint R (div u = div R) on a common time grid."""

    u0: spectral.SpectralField
    f: TimeSeries
    R: TimeSeries
    dtR: Optional[TimeSeries] = None

    def __post_init__(self):
        grid = self.u0.grid
        if self.u0.shape != (grid.n,):
            raise errors.InvalidInputError(f"initial velocity must be a vector field, got {self.u0.shape}")
        series = [self.f, self.R] + ([self.dtR] if self.dtR is not None else [])
        for s in series:
            self.u0._check(s[0])
            self.f._check(s)
            if s.shape != (grid.n,):
                raise errors.InvalidInputError(f"forcing and constraint must be vector fields, got {s.shape}")
        gap = spectral.l2_norm_spectral(
            spectral.divergence(self.u0) - spectral.divergence(self.R[0])
        )
        scale = max(1.0, spectral.l2_norm_spectral(spectral.divergence(self.u0)))
        if gap > CONSTRAINT_TOLERANCE * scale:
            raise errors.InvalidInputError(
                f"initial constraint violated: ||div u0 - div R(0)|| = {gap:.3e}"
            )

    @classmethod
    def from_callables(
        cls,
        u0: spectral.SpectralField,
        T: float,
        dt: float,
        forcing: Optional[Callable[[float], spectral.SpectralField]] = None,
        constraint: Optional[Callable[[float], spectral.SpectralField]] = None,
        constraint_rate: Optional[Callable[[float], spectral.SpectralField]] = None,
    ):
        """Samples forcing(t), R(t) and, when given, d/dt R(t) on the uniform time grid."""
        times = time_grid(T, dt)
        shape = (u0.grid.n,)
        zeros = TimeSeries.zeros(u0.grid, times, shape)
        f = zeros if forcing is None else TimeSeries.sample(forcing, times)
        R = zeros if constraint is None else TimeSeries.sample(constraint, times)
        if constraint is None:
            dtR = zeros
        elif constraint_rate is not None:
            dtR = TimeSeries.sample(constraint_rate, times)
        else:
            dtR = None
        return cls(u0, f, R, dtR)

    @property
    def grid(self) -> spectral.Grid:
        return self.u0.grid

    @property
    def times(self) -> np.ndarray:
        return self.f.times

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def R_dot(self) -> TimeSeries:
        return self.dtR if self.dtR is not None else self.R.derivative()

    def grad_div_R(self, k) -> spectral.SpectralField:
        return spectral.gradient(spectral.divergence(self.R[k]))

    def with_forcing(self, f: TimeSeries) -> "StokesData":
        return dataclasses.replace(self, f=f)

    def source_norms(self, p) -> np.ndarray:
        """||(f, d_t R, grad div R)(t)|| in the intersection of the low-frequency and critical spaces."""
        n = self.grid.n
        low = besov.BesovIndex.low_pressure(n, p)
        critical = besov.BesovIndex.velocity(n, p)
        R_dot = self.R_dot
        values = []
        for k in range(len(self.times)):
            combined = spectral.stack([self.f[k], R_dot[k], self.grad_div_R(k)])
            values.append(besov.intersection_norm(combined, low, critical))
        return np.array(values)


def deformation_tensor(u: spectral.SpectralField) -> spectral.SpectralField:
    """D(u) = grad u + (grad u)^T."""
    J = spectral.jacobian(u)
    return J + J.transpose()


def viscous_term(a: elliptic.CoefficientField, b: elliptic.CoefficientField, u) -> spectral.SpectralField:
    """a div(b D(u)), both products by collocation."""
    stress = spectral.multiply(b.values, deformation_tensor(u), dealias=False)
    return spectral.multiply(a.values, spectral.divergence(stress), dealias=False)


def phi_functions(h):
    """(e^h - 1)/h and (e^h - 1 - h)/h^2, by their Taylor series near 0."""
    h = np.asarray(h, dtype=float)
    small = np.abs(h) < PHI_SERIES_RADIUS
    safe = np.where(small, 1.0, h)
    em1 = np.expm1(safe)
    phi1 = np.where(small, 1 + h / 2 + h ** 2 / 6 + h ** 3 / 24 + h ** 4 / 120, em1 / safe)
    phi2 = np.where(
        small,
        0.5 + h / 6 + h ** 2 / 24 + h ** 3 / 120 + h ** 4 / 720,
        (em1 - safe) / safe ** 2,
    )
    return phi1, phi2


@dataclasses.dataclass(frozen=True)
class ExponentialWeights:
    """One step of u' = nu Lap u + H with H linear between the two nodes."""

    decay: np.ndarray
    first: np.ndarray
    second: np.ndarray

    @classmethod
    def build(cls, grid, nu, dt):
        h = -nu * grid.k_squared * dt
        phi1, phi2 = phi_functions(h)
        return cls(np.exp(h), dt * phi1, dt * phi2)

    def base(self, w, H) -> np.ndarray:
        return self.decay * w.fourier + (self.first - self.second) * H.fourier

    def advance(self, w, H, H_next) -> spectral.SpectralField:
        return w.with_fourier(self.base(w, H) + self.second * H_next.fourier)


def _check_constant_state(a_bar, b_bar):
    if not a_bar > 0 or not b_bar > 0:
        raise errors.InvalidInputError(f"constant state must be positive, got {a_bar}, {b_bar}")


def energy_norm(u: TimeSeries, gradP: TimeSeries, p=2.0) -> float:
    """sup_t ||u||_{B^{n/p-1}_{p,1}} + int ||grad^2 u|| + int ||grad P|| (intersection norm)."""
    n = u.grid.n
    critical = besov.BesovIndex.velocity(n, p)
    low = besov.BesovIndex.low_pressure(n, p)
    sup = max(besov.besov_norm(field, critical) for field in u)
    second = u.norms(
        lambda field: besov.besov_norm(spectral.gradient(spectral.gradient(field)), critical)
    )
    pressure = gradP.norms(lambda field: besov.intersection_norm(field, low, critical))
    return sup + time_integral(u.times, second) + time_integral(u.times, pressure)


def solution_traces(u: TimeSeries, gradP: TimeSeries, p=2.0) -> Dict[str, besov.NormTrace]:
    n = u.grid.n
    critical = besov.BesovIndex.velocity(n, p)
    low = besov.BesovIndex.low_pressure(n, p)
    traces = {
        "velocity": besov.sup_trace("velocity", critical),
        "dtu": besov.integral_trace("dtu", critical),
        "d2u": besov.integral_trace("d2u", critical),
        "gradP": besov.integral_trace("gradP", critical),
        "gradP_low": besov.integral_trace("gradP_low", low),
    }
    dtu = u.derivative() if len(u) > 1 else u * 0.0
    for k, t in enumerate(u.times):
        traces["velocity"].append(t, besov.besov_norm(u[k], critical))
        traces["dtu"].append(t, besov.besov_norm(dtu[k], critical))
        traces["d2u"].append(
            t, besov.besov_norm(spectral.gradient(spectral.gradient(u[k])), critical)
        )
        traces["gradP"].append(t, besov.intersection_norm(gradP[k], low, critical))
        traces["gradP_low"].append(t, besov.besov_norm(gradP[k], low))
    return traces


@dataclasses.dataclass(eq=False)
class StokesSolution:
    u: TimeSeries
    gradP: TimeSeries
    traces: Dict[str, besov.NormTrace]
    p: float = 2.0
    method: str = METHOD_CONSTANT
    iterations: int = 1
    contraction: Optional[float] = None
    details: Dict = dataclasses.field(default_factory=dict)

    @classmethod
    def build(cls, u: TimeSeries, gradP: TimeSeries, p=2.0, **kwargs):
        return cls(u, gradP, solution_traces(u, gradP, p), p, **kwargs)

    @property
    def grid(self):
        return self.u.grid

    @property
    def times(self):
        return self.u.times

    def energy(self) -> float:
        return energy_norm(self.u, self.gradP, self.p)

    def distance(self, other: "StokesSolution") -> float:
        return energy_norm(self.u - other.u, self.gradP - other.gradP, self.p)

    def trace_list(self, prefix="") -> List[besov.NormTrace]:
        return [
            dataclasses.replace(trace, name=f"{prefix}{trace.name}")
            for trace in self.traces.values()
        ]


def constant_stokes_solve(data: StokesData, a_bar, b_bar, p=2.0) -> StokesSolution:
    """Exact projection of the constant-coefficient system plus exponential integration.

    Q u = Q R, a_bar grad P = Q(f - d_t R + 2 a_bar b_bar grad div R), and the
    solenoidal part is advanced with the heat factor exp(-a_bar b_bar |k|^2 dt)
    and forcing linear between nodes.
    """
    _check_constant_state(a_bar, b_bar)
    nu = a_bar * b_bar
    weights = ExponentialWeights.build(data.grid, nu, data.dt)
    R_dot = data.R_dot
    forcing = [spectral.solenoidal_part(f) for f in data.f]
    w = [spectral.solenoidal_part(data.u0)]
    for k in range(data.steps):
        w.append(weights.advance(w[k], forcing[k], forcing[k + 1]))
    u = [w[k] + spectral.gradient_part(data.R[k]) for k in range(len(w))]
    gradP = [
        spectral.gradient_part(data.f[k] - R_dot[k] + data.grad_div_R(k) * (2 * nu)) / a_bar
        for k in range(len(w))
    ]
    logger.debug(f"constant stokes solve: nu={nu}, {data.steps} steps of {data.dt:.3e}")
    return StokesSolution.build(
        TimeSeries(data.times, u), TimeSeries(data.times, gradP), p, method=METHOD_CONSTANT
    )


def perturbed_stokes_solve(
    data: StokesData,
    a_bar,
    b_bar,
    c: spectral.SpectralField,
    tol=constants.DEFAULT_TOLERANCE,
    max_picard=constants.MAX_PICARD,
    p=2.0,
) -> StokesSolution:
    """Pressure coefficient a_bar + c: constant solves with the lagged forcing f - c grad P."""
    _check_constant_state(a_bar, b_bar)
    c = c.without_mean()
    deviation = besov.besov_norm(c, besov.BesovIndex.density(data.grid.n, p))
    solution = None
    previous_update = None
    contraction = 0.0
    for iteration in range(1, max_picard + 1):
        if solution is None:
            forcing = data
        else:
            lagged = solution.gradP.map(lambda g: spectral.multiply(c, g, dealias=False))
            forcing = data.with_forcing(data.f - lagged)
        candidate = constant_stokes_solve(forcing, a_bar, b_bar, p)
        if solution is not None:
            update = candidate.distance(solution)
            size = candidate.energy()
            if previous_update:
                contraction = update / previous_update
            if update <= tol * size or update == 0.0:
                logger.info(
                    f"perturbed stokes converged in {iteration} iterations, contraction {contraction:.3f}"
                )
                candidate.method = METHOD_PERTURBED
                candidate.iterations = iteration
                candidate.contraction = contraction
                candidate.details = {"deviation_norm": deviation}
                return candidate
            if iteration >= 3 and contraction >= 1.0:
                raise errors.PerturbationTooLarge(deviation, contraction)
            previous_update = update
        solution = candidate
    raise errors.PerturbationTooLarge(deviation, contraction)


def reference_viscosity(a: elliptic.CoefficientField, b: elliptic.CoefficientField) -> float:
    """Midpoint of the range of a b."""
    return 0.5 * (a.lower * b.lower + a.upper * b.upper)


def _pressure_and_rate(data, R_dot, a, b, nu_ref, u, w, k, tol):
    viscous = viscous_term(a, b, u)
    source = viscous + data.f[k]
    forcing = (source - R_dot[k]).without_mean()
    gradP = elliptic.solve_pressure(a, forcing, tol=tol).gradP
    rate = spectral.solenoidal_part(source - elliptic.flux(a, gradP)) - spectral.laplacian(w) * nu_ref
    return rate, gradP


def theta_stokes_solve(
    data: StokesData,
    a: elliptic.CoefficientField,
    b: elliptic.CoefficientField,
    nu_ref=None,
    tol=constants.DEFAULT_TOLERANCE,
    max_iter=constants.MAX_PICARD,
    p=2.0,
    warm: Optional[TimeSeries] = None,
) -> StokesSolution:
    """Direct solve of d_t u - a div(b D(u)) + a grad P = f, div u = div R.

    Q u = Q R; the solenoidal part is advanced exponentially in nu_ref Lap and
    the remainder is integrated by the trapezoid rule, with a fixed point on
    each step for the implicit end value.
    """
    a.values._check(data.u0)
    nu_ref = reference_viscosity(a, b) if nu_ref is None else nu_ref
    weights = ExponentialWeights.build(data.grid, nu_ref, data.dt)
    pressure_tol = tol * 0.01
    step_tol = tol * 0.1
    R_dot = data.R_dot
    QR = [spectral.gradient_part(R) for R in data.R]
    w = [spectral.solenoidal_part(data.u0)]
    u = [w[0] + QR[0]]
    rate, gradP0 = _pressure_and_rate(data, R_dot, a, b, nu_ref, u[0], w[0], 0, pressure_tol)
    gradP = [gradP0]
    sweeps = 0
    worst = 0.0
    for k in range(data.steps):
        base = weights.base(w[k], rate)
        if warm is not None:
            guess = spectral.solenoidal_part(warm[k + 1])
        else:
            guess = w[k].with_fourier(base + weights.second * rate.fourier)
        previous_gap = None
        for iteration in range(1, max_iter + 1):
            next_rate, next_gradP = _pressure_and_rate(
                data, R_dot, a, b, nu_ref, guess + QR[k + 1], guess, k + 1, pressure_tol
            )
            candidate = guess.with_fourier(base + weights.second * next_rate.fourier)
            gap = spectral.l2_norm_spectral(candidate - guess)
            size = spectral.l2_norm_spectral(candidate)
            guess = candidate
            if gap <= step_tol * size or gap == 0.0:
                break
            if previous_gap:
                worst = max(worst, gap / previous_gap)
                if iteration >= 3 and gap >= previous_gap:
                    raise errors.PerturbationTooLarge(
                        (a.upper * b.upper - a.lower * b.lower) / (2 * nu_ref), gap / previous_gap
                    )
            previous_gap = gap
        else:
            raise errors.PerturbationTooLarge(
                (a.upper * b.upper - a.lower * b.lower) / (2 * nu_ref), worst
            )
        sweeps += iteration
        w.append(guess)
        u.append(guess + QR[k + 1])
        gradP.append(next_gradP)
        rate = next_rate
    logger.debug(f"theta stokes solve: {sweeps} sweeps over {data.steps} steps, worst ratio {worst:.3f}")
    return StokesSolution.build(
        TimeSeries(data.times, u),
        TimeSeries(data.times, gradP),
        p,
        method=METHOD_THETA,
        iterations=sweeps,
        contraction=worst,
    )


def interpolate_coefficient(a: elliptic.CoefficientField, theta) -> elliptic.CoefficientField:
    """(1 - theta) a_bar + theta a, with the interpolated bounds."""
    values = a.values * theta + a.bar * (1 - theta)
    return elliptic.CoefficientField(
        values,
        a.bar,
        (1 - theta) * a.bar + theta * a.lower,
        (1 - theta) * a.bar + theta * a.upper,
    )


@dataclasses.dataclass(frozen=True, eq=False)
class HomotopyState:
    theta: float
    step: float
    a: elliptic.CoefficientField
    b: elliptic.CoefficientField
    solution: Optional[StokesSolution] = None

    @classmethod
    def at(cls, a, b, theta, step, solution=None):
        return cls(theta, step, interpolate_coefficient(a, theta), interpolate_coefficient(b, theta), solution)


@dataclasses.dataclass(frozen=True)
class StokesSettings:
    tol: float = constants.DEFAULT_TOLERANCE
    max_picard: int = constants.MAX_PICARD
    homotopy_eps0: float = constants.HOMOTOPY_EPS0
    splitting_threshold: float = constants.SPLITTING_THRESHOLD
    p: float = 2.0
    m: Optional[int] = None
    split: bool = True


def admissible_p(n, p) -> bool:
    low = 1.0 if n == 2 else 6 / 5
    return low < p < 4.0


def homotopy_forcing(data, a, b, state: HomotopyState, target, iterate: StokesSolution) -> StokesData:
    """f + (a_theta - a_target) grad P + a_target div(b_target D u) - a_theta div(b_theta D u)."""
    a_target = interpolate_coefficient(a, target)
    b_target = interpolate_coefficient(b, target)
    extra = []
    for k in range(len(data.times)):
        u = iterate.u[k]
        pressure = spectral.multiply(
            state.a.values - a_target.values, iterate.gradP[k], dealias=False
        )
        extra.append(
            pressure + viscous_term(a_target, b_target, u) - viscous_term(state.a, state.b, u)
        )
    return data.with_forcing(data.f + TimeSeries(data.times, extra))


def continuation_step(data, a, b, state: HomotopyState, target, nu_ref, settings: StokesSettings):
    """Fixed point of the theta-solver with the lagged difference to the target system."""
    deviation = (target - state.theta) * besov.besov_norm(
        a.deviation, besov.BesovIndex.density(data.grid.n, settings.p)
    )
    iterate = state.solution
    previous_update = None
    contraction = 0.0
    for iteration in range(1, settings.max_picard + 1):
        forced = homotopy_forcing(data, a, b, state, target, iterate)
        candidate = theta_stokes_solve(
            forced, state.a, state.b, nu_ref, settings.tol, settings.max_picard, settings.p, warm=iterate.u
        )
        update = candidate.distance(iterate)
        size = candidate.energy()
        if previous_update:
            contraction = update / previous_update
        iterate = candidate
        if update <= settings.tol * size or update == 0.0:
            return iterate, iteration, contraction
        if iteration >= 2 and contraction >= 1.0:
            break
        previous_update = update
    raise errors.PerturbationTooLarge(deviation, contraction)


def variable_stokes_solve(
    data: StokesData,
    a: elliptic.CoefficientField,
    b: elliptic.CoefficientField,
    settings: Optional[StokesSettings] = None,
) -> StokesSolution:
    """Continuation in theta from (a_bar, b_bar) to (a, b), then the low/high split of the result."""
    settings = StokesSettings() if settings is None else settings
    n = data.grid.n
    if not admissible_p(n, settings.p):
        raise errors.InvalidIndexError(f"p={settings.p} outside the admissible range for n={n}")
    a.values._check(data.u0)
    b.values._check(data.u0)
    nu_ref = reference_viscosity(a, b)
    history = []
    if a.is_constant() and b.is_constant():
        solution = theta_stokes_solve(data, a, b, nu_ref, settings.tol, settings.max_picard, settings.p)
        history.append({"theta": 1.0, "step": 1.0, "iterations": solution.iterations, "contraction": 0.0})
    else:
        state = HomotopyState.at(a, b, 0.0, settings.homotopy_eps0)
        start = theta_stokes_solve(data, state.a, state.b, nu_ref, settings.tol, settings.max_picard, settings.p)
        state = dataclasses.replace(state, solution=start)
        successes = 0
        while state.theta < 1.0:
            target = min(1.0, state.theta + state.step)
            try:
                advanced, iterations, contraction = continuation_step(
                    data, a, b, state, target, nu_ref, settings
                )
            except errors.PerturbationTooLarge as error:
                step = state.step / 2
                logger.warning(
                    f"homotopy step {state.step:.3e} at theta={state.theta:.4f} did not contract"
                    f" ({error.contraction:.3f}), halving"
                )
                if step < constants.HOMOTOPY_EPS_MIN:
                    raise errors.ContinuationFailure(state.theta, step)
                state = dataclasses.replace(state, step=step)
                successes = 0
                continue
            history.append(
                {"theta": target, "step": state.step, "iterations": iterations, "contraction": contraction}
            )
            logger.info(
                f"homotopy reached theta={target:.4f} in {iterations} iterations, contraction {contraction:.3f}"
            )
            successes += 1
            step = state.step
            if successes >= constants.HOMOTOPY_SUCCESSES_TO_GROW:
                step = min(2 * step, constants.HOMOTOPY_EPS_MAX)
                successes = 0
            state = HomotopyState.at(a, b, target, step, advanced)
        solution = state.solution
    solution.method = METHOD_HOMOTOPY
    solution.details = {"homotopy": history, "nu_ref": nu_ref}
    if history:
        solution.contraction = max(entry["contraction"] for entry in history)
    if settings.split:
        solution.details["split"] = frequency_split(data, a, b, solution, settings)
    return solution


def _default_split_index(a, b, settings):
    if settings.m is not None:
        return settings.m
    try:
        return splitting_diagnostics(a, b, p=settings.p, threshold=settings.splitting_threshold).details["m"]
    except errors.SplittingUnreachable as error:
        partition = spectral.build_partition(a.grid)
        logger.warning(f"{error}; splitting at the top of the band instead")
        return partition.j_max + 1


def frequency_split(data, a, b, solution: StokesSolution, settings: StokesSettings):
    """u = u1 + u2 with u1 under pressure coefficient a_bar + S_m(a - a_bar) and u2 driven by G(u1, grad P1)."""
    m = _default_split_index(a, b, settings)
    low = spectral.low_cutoff(a.deviation, m)
    high = a.deviation - low
    first = perturbed_stokes_solve(data, a.bar, b.bar, low, settings.tol, settings.max_picard, settings.p)
    constant = elliptic.CoefficientField.constant(data.grid, a.bar)
    constant_b = elliptic.CoefficientField.constant(data.grid, b.bar)
    correction = []
    for k in range(len(data.times)):
        u1 = first.u[k]
        correction.append(
            viscous_term(a, b, u1)
            - viscous_term(constant, constant_b, u1)
            - spectral.multiply(high, first.gradP[k], dealias=False)
        )
    zero = TimeSeries.zeros(data.grid, data.times, (data.grid.n,))
    second_data = StokesData(spectral.SpectralField.zeros(data.grid, (data.grid.n,)), TimeSeries(data.times, correction), zero, zero)
    second = theta_stokes_solve(second_data, a, b, None, settings.tol, settings.max_picard, settings.p)
    assembled = StokesSolution.build(first.u + second.u, first.gradP + second.gradP, settings.p)
    size = solution.energy()
    defect = assembled.distance(solution)
    logger.info(f"frequency split at m={m}: relative defect {defect / size if size else defect:.3e}")
    return {
        "m": m,
        "u1_energy": first.energy(),
        "u2_energy": second.energy(),
        "defect": defect / size if size > 0 else defect,
        "u1_iterations": first.iterations,
    }


def _deviation(field: spectral.SpectralField, bar) -> spectral.SpectralField:
    return (field - bar).without_mean()


def _coefficient_products(a, b):
    grad_a = spectral.gradient(a.values)
    grad_b = spectral.gradient(b.values)
    a_grad_b = spectral.multiply(a.values, grad_b, dealias=False)
    b_grad_a = spectral.multiply(b.values, grad_a, dealias=False)
    product = _deviation(spectral.multiply(a.values, b.values, dealias=False), a.bar * b.bar)
    return a_grad_b, b_grad_a, product


def _tail(u, idx, m):
    return besov.tail_norm(u, idx, m)


def _low(u, idx, m):
    return besov.besov_norm(spectral.low_cutoff(u, m), idx)


def pressure_constant(a: elliptic.CoefficientField, p) -> float:
    """(1/a_bar + ||1/a - 1/a_bar||_{B^{n/p}_{p,1}}) (1 + ||a - a_bar||_{B^{n/p}_{p,1}} / a_lower)."""
    density = besov.BesovIndex.density(a.grid.n, p)
    inverse = spectral.apply_pointwise(a.values, lambda x: 1.0 / x)
    return (1 / a.bar + besov.besov_norm(_deviation(inverse, 1 / a.bar), density)) * (
        1 + besov.besov_norm(a.deviation, density) / a.lower
    )


def splitting_terms(a, b, m, p=2.0, M=None) -> Dict[str, float]:
    n = a.grid.n
    s = n / p
    density = besov.BesovIndex(s, p, 1)
    velocity = besov.BesovIndex(s - 1, p, 1)
    half = besov.BesovIndex(s - 0.5, p, 1)
    half2 = besov.BesovIndex(s - 0.5, p, 2)
    a_grad_b, b_grad_a, product = _coefficient_products(a, b)
    both = spectral.stack([a_grad_b, b_grad_a])
    inverse = spectral.apply_pointwise(a.values, lambda x: 1.0 / x)
    reciprocal = 1 / a.bar + besov.besov_norm(_deviation(inverse, 1 / a.bar), density)
    C_hat = pressure_constant(a, p)
    grad_a = spectral.gradient(a.values)
    if n == 2:
        low_gradient = _low(grad_a, besov.BesovIndex(s, p, 2), m)
    else:
        low_gradient = _low(grad_a, half2, m)
    amplitude = (a.bar + besov.besov_norm(a.deviation, density)) * (
        b.bar + besov.besov_norm(b.deviation, density)
    )
    terms = {
        "T1": _tail(a.deviation, density, m) * reciprocal,
        "T2": C_hat * (1 + low_gradient),
        "T4": _tail(both, velocity, m) + _tail(product, density, m),
        "velocity": _tail(b_grad_a, velocity, m) + _tail(a_grad_b, velocity, m) + _tail(product, velocity, m),
    }
    terms["T3"] = _low(both, half, m) + terms["T2"] * amplitude
    if n == 2 and M is not None:
        critical = besov.BesovIndex(s, p, 1)
        gain = C_hat * (1 + low_gradient)
        terms["T3_M"] = _low(both, critical, m) + gain * _low(both, critical, M)
        terms["T4_M"] = (
            _tail(a_grad_b, velocity, m)
            + _tail(product, density, m)
            + gain * (_tail(a_grad_b, velocity, M) + _tail(product, velocity, M))
        )
    return terms


def splitting_diagnostics(a, b, m=None, p=2.0, threshold=constants.SPLITTING_THRESHOLD, seed=None):
    """T^1..T^4 over the dyadic range and the smallest m with T^1 and T^4 below the threshold."""
    partition = spectral.build_partition(a.grid)
    if m is not None:
        partition.check_index(m)
    rows = []
    chosen = None
    for candidate in partition.indices:
        terms = splitting_terms(a, b, candidate, p)
        rows.append(dict(terms, m=candidate))
        if chosen is None and terms["T1"] < threshold and terms["T4"] < threshold:
            chosen = candidate
    if chosen is None:
        best = min(max(row["T1"], row["T4"]) for row in rows)
        raise errors.SplittingUnreachable(threshold, best)
    details = {"rows": rows, "m": chosen, "threshold": threshold}
    if m is not None:
        details["at_m"] = splitting_terms(a, b, m, p)
    if a.grid.n == 2:
        M = None
        for candidate in partition.indices:
            if candidate < chosen:
                continue
            terms = splitting_terms(a, b, chosen, p, M=candidate)
            if terms["T4_M"] < threshold:
                M = candidate
                details["at_M"] = terms
                break
        if M is None:
            logger.warning(f"no second cutoff M brings T4_(m,M) below {threshold}")
        details["M"] = M
    logger.info(f"splitting index m={chosen} (threshold {threshold})")
    chosen_row = rows[chosen - partition.j_min]
    return reports.report(
        "stokes_splitting",
        chosen_row["T1"],
        True,
        grid=a.grid,
        seed=seed,
        parameters={"p": p, "threshold": threshold, "m": m},
        details=details,
    )


def apriori_estimate_check(solution: StokesSolution, data: StokesData, a=None, b=None, seed=None):
    """Smallest C with LHS(t) <= RHS(t) exp(C (t + 1)) at every stored time."""
    p = solution.p
    traces = solution.traces
    sup = traces["velocity"].running()
    second = traces["d2u"].running()
    pressure = traces["gradP"].running()
    source = besov.integral_trace("source")
    for t, value in zip(data.times, data.source_norms(p)):
        source.append(t, value)
    initial = besov.besov_norm(data.u0, besov.BesovIndex.velocity(data.grid.n, p))
    rhs = [initial + value for value in source.running()]
    lhs = [x + y + z for x, y, z in zip(sup, second, pressure)]
    constant = None
    for t, left, right in zip(data.times, lhs, rhs):
        if left == 0.0 and right == 0.0:
            continue
        value = math.inf if right == 0.0 else math.log(left / right) / (t + 1)
        constant = value if constant is None else max(constant, value)
    parameters = {"p": p, "dt": data.dt, "T": data.T}
    if a is not None:
        parameters["a_bar"] = a.bar
    if b is not None:
        parameters["b_bar"] = b.bar
    return reports.report(
        "stokes_apriori",
        constant,
        constant is None or math.isfinite(constant),
        grid=data.grid,
        seed=seed,
        parameters=parameters,
        details={"lhs": lhs, "rhs": rhs, "times": list(data.times)},
    )


def residual_check(solution: StokesSolution, data: StokesData, a, b, tol=constants.DEFAULT_TOLERANCE, seed=None):
    """Relative L2 defect of the discrete solution in the momentum equation at interior nodes."""
    dtu = solution.u.derivative()
    residuals = []
    interior = []
    constraint = 0.0
    for k in range(len(data.times)):
        u = solution.u[k]
        constraint = max(
            constraint,
            spectral.l2_norm_spectral(spectral.divergence(u) - spectral.divergence(data.R[k])),
        )
        if k == 0 or k == len(data.times) - 1:
            continue
        viscous = viscous_term(a, b, u)
        pressure = elliptic.flux(a, solution.gradP[k])
        defect = dtu[k] - viscous + pressure - data.f[k]
        scale = max(
            spectral.l2_norm_spectral(dtu[k]),
            spectral.l2_norm_spectral(viscous),
            spectral.l2_norm_spectral(data.f[k]),
        )
        gap = spectral.l2_norm_spectral(defect)
        residuals.append(gap / scale if scale > 0 else gap)
        interior.append(float(data.times[k]))
    worst = max(residuals) if residuals else 0.0
    bound = 10 * data.dt ** 2 + 10 * tol
    return reports.report(
        "stokes_residual",
        worst,
        worst <= bound and constraint <= 10 * tol * max(1.0, solution.energy()),
        grid=data.grid,
        seed=seed,
        parameters={"dt": data.dt, "tol": tol},
        details={"residuals": residuals, "times": interior, "bound": bound, "constraint": constraint},
    )


def time_order(coarse: reports.DiagnosticsReport, refined: reports.DiagnosticsReport) -> Optional[float]:
    """Worst coarse over worst refined residual, both read at the coarse interior times the refined run shares."""
    refined_times = np.asarray(refined.details["times"], dtype=float)
    if not len(refined_times):
        return None
    coarse_worst = refined_worst = 0.0
    for t, residual in zip(coarse.details["times"], coarse.details["residuals"]):
        k = int(np.argmin(np.abs(refined_times - t)))
        if abs(refined_times[k] - t) > 1e-9 * max(1.0, abs(t)):
            continue
        coarse_worst = max(coarse_worst, residual)
        refined_worst = max(refined_worst, refined.details["residuals"][k])
    return reports.ratio(coarse_worst, refined_worst)


def pressure_gain_check(solution: StokesSolution, a: elliptic.CoefficientField, seed=None):
    """||P(a grad P)|| / ||grad P|| against the product bound ||a - a_bar||_inf."""
    idx = besov.BesovIndex.velocity(a.grid.n, solution.p)
    bound = spectral.lp_norm(a.deviation, math.inf)
    ratio = 0.0
    l2_ratio = 0.0
    for gradP in solution.gradP:
        size = besov.besov_norm(gradP, idx)
        if size == 0.0:
            continue
        projected = spectral.solenoidal_part(elliptic.flux(a, gradP)).without_mean()
        ratio = max(ratio, besov.besov_norm(projected, idx) / size)
        l2_ratio = max(
            l2_ratio, spectral.l2_norm_spectral(projected) / spectral.l2_norm_spectral(gradP)
        )
    return reports.report(
        "stokes_pressure_gain",
        ratio,
        ratio < bound or bound == 0.0,
        grid=a.grid,
        seed=seed,
        parameters={"p": solution.p},
        details={"bound": bound, "margin": bound - ratio, "l2_ratio": l2_ratio},
    )


def uniqueness_check(data, a, b, settings: Optional[StokesSettings] = None, seed=None):
    """The continuation path and the direct theta = 1 solve from identical data agree in E_T."""
    settings = StokesSettings() if settings is None else settings
    settings = dataclasses.replace(settings, split=False)
    continued = variable_stokes_solve(data, a, b, settings)
    direct = theta_stokes_solve(
        data, a, b, reference_viscosity(a, b), settings.tol, settings.max_picard, settings.p
    )
    size = direct.energy()
    distance = continued.distance(direct)
    relative = distance / size if size > 0 else distance
    return reports.report(
        "stokes_uniqueness",
        relative,
        relative <= 10 * settings.tol,
        grid=data.grid,
        seed=seed,
        parameters={"tol": settings.tol, "p": settings.p},
        details={"distance": distance, "energy": size},
    )
