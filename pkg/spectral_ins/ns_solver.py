import dataclasses
import logging
import math
from typing import Dict, List, Optional

import numpy as np

from spectral_ins import besov
from spectral_ins import constants
from spectral_ins import elliptic
from spectral_ins import errors
from spectral_ins import lagrange
from spectral_ins import random_fields
from spectral_ins import reports
from spectral_ins import spectral
from spectral_ins import stokes

logger = logging.getLogger(__name__)

REFINEMENT = 4
LAW_SAMPLES = 257
MIN_STEPS = 2
MAX_HALVINGS = 20
DENSITY_RANGE_SLACK = 1e-2
MASS_TOLERANCE = 1e-8
EQUIVALENCE_TOLERANCE = 1e-3
RESIDUAL_CONSTANT = 10.0
RESIDUAL_ORDER = 3.5


@dataclasses.dataclass(frozen=True)
class ViscosityLaw:
    """mu(rho) for one of the registered laws; rho_bar None means the density mean."""

    name: str = constants.MU_LAW_LINEAR
    mu0: float = 1.0
    slope: float = 0.1
    exponent: float = 1.0
    rho_bar: Optional[float] = None

    def __post_init__(self):
        if self.name not in _LAWS:
            raise errors.InvalidInputError(f"unknown viscosity law {self.name!r}, expected one of {constants.MU_LAWS}")
        if not self.mu0 > 0:
            raise errors.InvalidInputError(f"viscosity scale mu0={self.mu0} must be positive")

    def with_reference(self, rho_bar) -> "ViscosityLaw":
        return self if self.rho_bar is not None else dataclasses.replace(self, rho_bar=float(rho_bar))

    def __call__(self, rho):
        return _LAWS[self.name](self, np.asarray(rho, dtype=float))

    def to_dict(self):
        return dataclasses.asdict(self)


def _constant_law(law, rho):
    return np.full_like(rho, law.mu0)


def _linear_law(law, rho):
    return law.mu0 * (1 + law.slope * (rho - law.rho_bar))


def _power_law(law, rho):
    return law.mu0 * (rho / law.rho_bar) ** law.exponent


_LAWS = {
    constants.MU_LAW_CONSTANT: _constant_law,
    constants.MU_LAW_LINEAR: _linear_law,
    constants.MU_LAW_POWER: _power_law,
}


def refine(u: spectral.SpectralField, factor=REFINEMENT) -> spectral.SpectralField:
    """The same trigonometric polynomial on a grid with ``factor`` times more points per axis."""
    grid = u.grid
    fine = spectral.Grid(grid.n, grid.N * factor, grid.L)
    coefficients = np.zeros(u.shape + fine.rshape, dtype=complex)
    index = [np.fft.fftfreq(grid.N, 1.0 / grid.N).astype(int) % fine.N for _ in range(grid.n - 1)]
    index.append(np.arange(grid.N // 2 + 1))
    coefficients[(Ellipsis,) + np.ix_(*index)] = u.fourier
    return spectral.SpectralField(fine, coefficients, u.mean_excluded)


def refined_bounds(u: spectral.SpectralField):
    samples = refine(u).physical
    return float(np.min(samples)), float(np.max(samples))


@dataclasses.dataclass(frozen=True, eq=False)
class DensityState:
    """rho_0 with its bounds, the viscosity law and mu(rho_0)."""

    rho0: elliptic.CoefficientField
    law: ViscosityLaw
    mu: elliptic.CoefficientField

    @classmethod
    def build(cls, values: spectral.SpectralField, law: Optional[ViscosityLaw] = None) -> "DensityState":
        law = ViscosityLaw() if law is None else law
        if values.is_constant():
            rho_bar = float(values.mean)
            if not rho_bar > 0:
                raise errors.InvalidInputError(f"density must be positive, got {rho_bar}")
            law = law.with_reference(rho_bar)
            mu = float(law(rho_bar))
            if not mu > 0:
                raise errors.InvalidInputError(f"viscosity law gives mu({rho_bar}) = {mu}")
            grid = values.grid
            return cls(
                elliptic.CoefficientField.constant(grid, rho_bar),
                law,
                elliptic.CoefficientField.constant(grid, mu),
            )
        lower, upper = refined_bounds(values)
        lower = min(lower, float(np.min(values.physical)))
        upper = max(upper, float(np.max(values.physical)))
        if not lower > 0:
            raise errors.InvalidInputError(f"density must be bounded below by a positive constant, min {lower:.3e}")
        rho0 = elliptic.CoefficientField.from_values(values, lower, upper)
        law = law.with_reference(rho0.bar)
        on_range = law(np.linspace(lower, upper, LAW_SAMPLES))
        if not np.all(on_range > 0):
            raise errors.InvalidInputError(
                f"viscosity law {law.name} is not positive on [{lower:.4g}, {upper:.4g}]"
            )
        mu = spectral.apply_pointwise(values, law)
        return cls(rho0, law, elliptic.CoefficientField.from_values(mu, float(np.min(on_range)), float(np.max(on_range))))

    @classmethod
    def constant(cls, grid, rho_bar=1.0, law: Optional[ViscosityLaw] = None) -> "DensityState":
        return cls.build(spectral.SpectralField.constant(grid, rho_bar), law)

    @classmethod
    def random(
        cls, grid, rng, rho_bar=1.0, contrast=0.2, law: Optional[ViscosityLaw] = None, shells=None
    ) -> "DensityState":
        """rho_bar (1 + contrast g) with g a low-frequency random field of unit grid max."""
        return cls.build(random_fields.coefficient_values(grid, rng, rho_bar, contrast, shells=shells), law)

    @property
    def grid(self) -> spectral.Grid:
        return self.rho0.grid

    @property
    def rho_bar(self) -> float:
        return self.rho0.bar

    @property
    def bounds(self):
        return self.rho0.lower, self.rho0.upper

    @property
    def a(self) -> elliptic.CoefficientField:
        """1 / rho_0."""
        if self.rho0.is_constant():
            return elliptic.CoefficientField.constant(self.grid, 1.0 / self.rho_bar)
        return self.rho0.reciprocal()

    @property
    def nu(self) -> float:
        return float(self.law(self.rho_bar)) / self.rho_bar

    def composition_check(self, p=2.0, seed=None):
        """||mu(rho_0) - mu(rho_bar)||_{B^{n/p}_{p,1}} / ||rho_0 - rho_bar||_{B^{n/p}_{p,1}}."""
        idx = besov.BesovIndex.density(self.grid.n, p)
        before = besov.besov_norm(self.rho0.deviation, idx)
        after = besov.besov_norm(self.mu.deviation, idx)
        measured = reports.ratio(after, before)
        return reports.report(
            "viscosity_composition",
            measured,
            measured is None or math.isfinite(measured),
            grid=self.grid,
            seed=seed,
            parameters={"p": p, "law": self.law.to_dict()},
            details={"density_norm": before, "viscosity_norm": after, "bounds": list(self.bounds)},
        )


@dataclasses.dataclass(frozen=True)
class NSSettings:
    T: float = 0.1
    dt: float = 0.01
    tol: float = 1e-8
    alpha: float = constants.ALPHA
    radius: float = constants.BALL_RADIUS
    T_floor: float = constants.T_FLOOR
    contraction_slack: float = constants.CONTRACTION_SLACK
    cfl: float = constants.CFL
    max_iter: int = constants.MAX_PICARD
    p: float = 2.0

    def stokes_settings(self) -> stokes.StokesSettings:
        return stokes.StokesSettings(tol=self.tol, max_picard=self.max_iter, p=self.p, split=False)


def deformation_transported(A: spectral.SpectralField, u: spectral.SpectralField) -> spectral.SpectralField:
    """D_A(u) = Du A + (Du A)^T."""
    JA = spectral.einsum("im,ml->il", spectral.jacobian(u), A, dealias=False)
    return JA + JA.transpose()


def transported_viscous_term(mu: elliptic.CoefficientField, A, u) -> spectral.SpectralField:
    """div(mu A D_A(u))."""
    stress = spectral.einsum("jl,li->ji", A, deformation_transported(A, u), dealias=False)
    return spectral.divergence(spectral.multiply(mu.values, stress, dealias=False))


def transposed_action(A, g) -> spectral.SpectralField:
    """A^T g."""
    return spectral.einsum("ji,j->i", A, g, dealias=False)


def transport_forcing(mu: elliptic.CoefficientField, A, w, gradQ) -> spectral.SpectralField:
    """div(mu A D_A(w) - mu D(w)) + (Id - A^T) grad Q."""
    plain = spectral.divergence(spectral.multiply(mu.values, stokes.deformation_tensor(w), dealias=False))
    return transported_viscous_term(mu, A, w) - plain + gradQ - transposed_action(A, gradQ)


def transport_constraint(A, w) -> spectral.SpectralField:
    """(Id - A) w, whose divergence div w must match."""
    return w - spectral.einsum("ji,i->j", A, w, dealias=False)


def _zero_series(grid, times):
    return stokes.TimeSeries.zeros(grid, times, (grid.n,))


def _check_velocity(rho: DensityState, u0: spectral.SpectralField):
    rho.rho0.values._check(u0)
    if u0.shape != (u0.grid.n,):
        raise errors.InvalidInputError(f"initial velocity must be a vector field, got {u0.shape}")
    gap = spectral.l2_norm_spectral(spectral.divergence(u0))
    if gap > stokes.CONSTRAINT_TOLERANCE * max(1.0, spectral.l2_norm_spectral(u0)):
        raise errors.InvalidInputError(f"initial velocity is not divergence free: ||div u0|| = {gap:.3e}")


def base_solve(rho: DensityState, u0, times, settings: NSSettings) -> stokes.StokesSolution:
    """u_L: rho_0 d_t u - div(mu(rho_0) D u) + grad P = 0, div u = 0, u(0) = u0."""
    zero = _zero_series(u0.grid, times)
    data = stokes.StokesData(u0, zero, zero, zero)
    return stokes.variable_stokes_solve(data, rho.a, rho.mu, settings.stokes_settings())


def linear_smallness(u_L: stokes.StokesSolution, p=2.0) -> float:
    """||grad u_L||_{L^2_T} + ||(d_t u_L, grad^2 u_L, grad P_L)||_{L^1_T}, all in B^{n/p-1}_{p,1}."""
    idx = besov.BesovIndex.velocity(u_L.grid.n, p)
    times = u_L.times
    gradient = u_L.u.norms(lambda u: besov.besov_norm(spectral.jacobian(u), idx))
    dtu = u_L.u.derivative() if len(u_L.u) > 1 else u_L.u * 0.0
    rest = [
        besov.besov_norm(d, idx)
        + besov.besov_norm(spectral.gradient(spectral.gradient(u)), idx)
        + besov.besov_norm(g, idx)
        for d, u, g in zip(dtu, u_L.u, u_L.gradP)
    ]
    return math.sqrt(stokes.time_integral(times, np.square(gradient))) + stokes.time_integral(times, rest)


def transport_smallness(v: stokes.TimeSeries, p=2.0) -> float:
    """||grad v||_{L^2_T(B^{n/p-1}_{p,1})} + ||grad v||_{L^1_T(B^{n/p}_{p,1})}."""
    n = v.grid.n
    low = v.norms(lambda u: besov.besov_norm(spectral.jacobian(u), besov.BesovIndex.velocity(n, p)))
    high = v.norms(lambda u: besov.besov_norm(spectral.jacobian(u), besov.BesovIndex.density(n, p)))
    return math.sqrt(stokes.time_integral(v.times, np.square(low))) + stokes.time_integral(v.times, high)


@dataclasses.dataclass(eq=False)
class LinearSolution:
    """Solution of the system linearised around a frozen transport velocity: u = u_L + u_tilde."""

    u: stokes.TimeSeries
    gradP: stokes.TimeSeries
    u_tilde: stokes.TimeSeries
    gradP_tilde: stokes.TimeSeries
    iterations: int
    contraction: Optional[float]
    flows: List[lagrange.FlowState]


def linear_lagrangian_solve(
    rho: DensityState,
    v_bar: stokes.TimeSeries,
    u0: spectral.SpectralField,
    settings: Optional[NSSettings] = None,
    u_L: Optional[stokes.StokesSolution] = None,
    initial=None,
) -> LinearSolution:
    """Fixed point of Phi: (w, grad Q) -> Stokes solution with forcing F_v(u_L + w, grad P_L + grad Q) / rho_0."""
    settings = NSSettings() if settings is None else settings
    _check_velocity(rho, u0)
    times = v_bar.times
    grid = u0.grid
    flows = lagrange.flow_trajectory(v_bar, settings.p, 2 * settings.alpha)
    if u_L is None:
        u_L = base_solve(rho, u0, times, settings)
    u_L.u._check(v_bar)
    if initial is None:
        u_tilde, gradP_tilde = _zero_series(grid, times), _zero_series(grid, times)
    else:
        u_tilde, gradP_tilde = initial
    if all(not np.any(flow.X.fourier) for flow in flows):
        logger.debug("identity transport: the linear solution is u_L")
        zero = _zero_series(grid, times)
        return LinearSolution(u_L.u, u_L.gradP, zero, zero, 0, None, flows)

    a = rho.a
    nu_ref = stokes.reference_viscosity(a, rho.mu)
    zero_velocity = spectral.SpectralField.zeros(grid, (grid.n,))
    previous_update = None
    contraction = None
    for iteration in range(1, settings.max_iter + 1):
        w = u_L.u + u_tilde
        Q = u_L.gradP + gradP_tilde
        forcing = [
            spectral.multiply(a.values, transport_forcing(rho.mu, flow.A, w[k], Q[k]), dealias=False)
            for k, flow in enumerate(flows)
        ]
        constraint = [transport_constraint(flow.A, w[k]) for k, flow in enumerate(flows)]
        data = stokes.StokesData(
            zero_velocity, stokes.TimeSeries(times, forcing), stokes.TimeSeries(times, constraint)
        )
        candidate = stokes.theta_stokes_solve(
            data, a, rho.mu, nu_ref, settings.tol, settings.max_iter, settings.p, warm=u_tilde
        )
        update = stokes.energy_norm(candidate.u - u_tilde, candidate.gradP - gradP_tilde, settings.p)
        size = stokes.energy_norm(u_L.u + candidate.u, u_L.gradP + candidate.gradP, settings.p)
        if previous_update:
            contraction = update / previous_update
        u_tilde, gradP_tilde = candidate.u, candidate.gradP
        if update <= settings.tol * size or update == 0.0:
            logger.debug(f"linear fixed point converged in {iteration} iterations, contraction {contraction}")
            return LinearSolution(
                u_L.u + u_tilde, u_L.gradP + gradP_tilde, u_tilde, gradP_tilde, iteration, contraction, flows
            )
        if iteration >= 3 and contraction is not None and contraction >= 1.0:
            raise errors.LinearFixedPointFailed(contraction)
        previous_update = update
    raise errors.LinearFixedPointFailed(contraction if contraction is not None else math.inf)


@dataclasses.dataclass(eq=False)
class EulerianFields:
    times: np.ndarray
    rho: stokes.TimeSeries
    u: stokes.TimeSeries
    gradP: stokes.TimeSeries
    details: Dict = dataclasses.field(default_factory=dict)

    @property
    def grid(self):
        return self.u.grid


@dataclasses.dataclass(eq=False)
class NSSolution:
    """Lagrangian velocity and pressure gradient, the flow of the velocity and the linear part u_L."""

    rho: DensityState
    u: stokes.TimeSeries
    gradP: stokes.TimeSeries
    flows: List[lagrange.FlowState]
    u_L: Optional[stokes.StokesSolution]
    traces: Dict[str, besov.NormTrace]
    p: float = 2.0
    iterations: int = 0
    contraction: Optional[float] = None
    details: Dict = dataclasses.field(default_factory=dict)
    eulerian: Optional[EulerianFields] = None

    @property
    def grid(self):
        return self.u.grid

    @property
    def times(self):
        return self.u.times

    @property
    def T(self):
        return float(self.times[-1])

    @property
    def u0(self):
        return self.u[0]

    def trace_list(self, prefix="") -> List[besov.NormTrace]:
        return [dataclasses.replace(trace, name=f"{prefix}{trace.name}") for trace in self.traces.values()]


def _admissible_horizon(rho, u0, settings: NSSettings):
    """Halve T until the linear part is small enough."""
    T = settings.T
    while True:
        times = stokes.time_grid(T, min(settings.dt, T / MIN_STEPS))
        u_L = base_solve(rho, u0, times, settings)
        smallness = linear_smallness(u_L, settings.p)
        if smallness <= settings.alpha:
            return T, u_L, smallness
        logger.warning(f"linear part {smallness:.3e} above alpha={settings.alpha} at T={T:.3e}, halving T")
        T /= 2
        if T < settings.T_floor:
            raise errors.NoAdmissibleHorizon(T, smallness)


def nonlinear_solve(rho: DensityState, u0: spectral.SpectralField, settings: Optional[NSSettings] = None) -> NSSolution:
    """Fixed point of S: v_tilde -> linear solution around u_L + v_tilde, minus u_L.

    Divergence of the iteration raises LinearFixedPointFailed. A converged
    iteration whose worst update ratio exceeds CONTRACTION_BOUND plus the slack
    is only logged here; contraction_check turns it into a failing report.
    """
    settings = NSSettings() if settings is None else settings
    grid = u0.grid
    if not stokes.admissible_p(grid.n, settings.p):
        raise errors.InvalidIndexError(f"p={settings.p} outside the admissible range for n={grid.n}")
    _check_velocity(rho, u0)
    if not np.any(u0.fourier):
        times = stokes.time_grid(settings.T, settings.dt)
        zero = _zero_series(grid, times)
        flows = [lagrange.FlowState.identity(grid, t) for t in times]
        logger.info("zero initial velocity: the solution vanishes")
        return NSSolution(
            rho, zero, zero, flows, None, stokes.solution_traces(zero, zero, settings.p), settings.p,
            details={"T": settings.T, "linear_smallness": 0.0, "transport_smallness": 0.0, "ratios": []},
        )

    T, u_L, linear = _admissible_horizon(rho, u0, settings)
    times = u_L.times
    v_tilde = _zero_series(grid, times)
    Q_tilde = _zero_series(grid, times)
    previous_update = None
    ratios = []
    linear_iterations = []
    for iteration in range(1, settings.max_iter + 1):
        solution = linear_lagrangian_solve(
            rho, u_L.u + v_tilde, u0, settings, u_L=u_L, initial=(v_tilde, Q_tilde)
        )
        linear_iterations.append(solution.iterations)
        update = stokes.energy_norm(solution.u_tilde - v_tilde, solution.gradP_tilde - Q_tilde, settings.p)
        size = stokes.energy_norm(solution.u, solution.gradP, settings.p)
        if previous_update:
            ratios.append(update / previous_update)
        v_tilde, Q_tilde = solution.u_tilde, solution.gradP_tilde
        if update <= settings.tol * size or update == 0.0:
            break
        if len(ratios) >= 2 and ratios[-1] >= 1.0:
            raise errors.LinearFixedPointFailed(ratios[-1])
        previous_update = update
    else:
        raise errors.LinearFixedPointFailed(ratios[-1] if ratios else math.inf)

    contraction = max(ratios) if ratios else None
    bound = constants.CONTRACTION_BOUND + settings.contraction_slack
    if contraction is not None and contraction > bound:
        logger.warning(f"outer contraction factor {contraction:.3f} above {bound:.2f}")
    ball = stokes.energy_norm(v_tilde, Q_tilde, settings.p)
    if ball > settings.radius:
        logger.warning(f"fixed point left the ball: ||(v, grad Q)|| = {ball:.3e} > R = {settings.radius}")
    u = solution.u
    flows = lagrange.flow_trajectory(u, settings.p, 2 * settings.alpha)
    logger.info(
        f"nonlinear solve on [0, {T:.3e}] converged in {iteration} iterations"
        f" (contraction {contraction}), max |det DX - 1| = {max(f.determinant_defect() for f in flows):.3e}"
    )
    return NSSolution(
        rho,
        u,
        solution.gradP,
        flows,
        u_L,
        stokes.solution_traces(u, solution.gradP, settings.p),
        settings.p,
        iteration,
        contraction,
        {
            "T": T,
            "requested_T": settings.T,
            "linear_smallness": linear,
            "transport_smallness": transport_smallness(u, settings.p),
            "ball": ball,
            "ratios": ratios,
            "linear_iterations": linear_iterations,
        },
    )


def to_eulerian(solution: NSSolution) -> EulerianFields:
    """rho = rho_0 o X^{-1}, u = u_bar o X^{-1} and grad P = (A^T grad P_bar) o X^{-1} per stored time."""
    rho, u, gradP = [], [], []
    iterations = 0
    defect = 0.0
    for flow, velocity, pressure in zip(solution.flows, solution.u, solution.gradP):
        inverse = lagrange.inverse_flow(flow)
        iterations = max(iterations, inverse.iterations)
        defect = max(defect, inverse.defect)
        rho.append(lagrange.compose(solution.rho.rho0.values, inverse.displacement))
        u.append(lagrange.compose(velocity, inverse.displacement))
        gradP.append(lagrange.compose(transposed_action(flow.A, pressure), inverse.displacement))
    times = solution.times
    return EulerianFields(
        times,
        stokes.TimeSeries(times, rho),
        stokes.TimeSeries(times, u),
        stokes.TimeSeries(times, gradP),
        {"inverse_iterations": iterations, "inverse_defect": defect},
    )


def _advection(u: spectral.SpectralField) -> spectral.SpectralField:
    """(u . grad) u, dealiased."""
    return spectral.einsum("l,il->i", u, spectral.jacobian(u))


def _coefficients(rho: spectral.SpectralField, law: ViscosityLaw):
    a = elliptic.CoefficientField.from_values(spectral.apply_pointwise(rho, lambda x: 1.0 / x))
    mu = elliptic.CoefficientField.from_values(spectral.apply_pointwise(rho, law))
    return a, mu


def _eulerian_rates(u, rho, law, nu_ref, tol):
    """Velocity remainder P(G - a grad P) - nu_ref Lap u, density rate and grad P."""
    a, mu = _coefficients(rho, law)
    G = stokes.viscous_term(a, mu, u) - _advection(u)
    gradP = elliptic.solve_pressure(a, G.without_mean(), tol=tol).gradP
    rate = spectral.solenoidal_part(G - elliptic.flux(a, gradP)) - spectral.laplacian(u) * nu_ref
    density_rate = -spectral.divergence(spectral.multiply(rho, u))
    return rate, density_rate, gradP


class _EulerianStepper:
    """ETD2RK for the velocity, Heun for the density, halving the step on CFL violation."""

    def __init__(self, grid, law, nu_ref, cfl, tol):
        self.grid = grid
        self.law = law
        self.nu_ref = nu_ref
        self.cfl = cfl
        self.tol = tol
        self.weights = {}
        self.rejections = 0

    def _weights(self, dt):
        if dt not in self.weights:
            self.weights[dt] = stokes.ExponentialWeights.build(self.grid, self.nu_ref, dt)
        return self.weights[dt]

    def courant(self, u, dt):
        return dt * float(np.max(spectral.lp_magnitude(u), initial=0.0)) / self.grid.dx

    def advance(self, u, rho, dt, depth=0):
        if self.courant(u, dt) > self.cfl:
            if depth >= MAX_HALVINGS:
                raise errors.InvalidInputError(f"CFL condition unreachable: step {dt:.3e}")
            self.rejections += 1
            logger.debug(f"step {dt:.3e} rejected (CFL), halving")
            u, rho = self.advance(u, rho, dt / 2, depth + 1)
            return self.advance(u, rho, dt / 2, depth + 1)
        weights = self._weights(dt)
        rate, density_rate, _ = _eulerian_rates(u, rho, self.law, self.nu_ref, self.tol)
        u_star = u.with_fourier(weights.decay * u.fourier + weights.first * rate.fourier)
        rho_star = rho + density_rate * dt
        rate_star, density_star, _ = _eulerian_rates(u_star, rho_star, self.law, self.nu_ref, self.tol)
        return weights.advance(u, rate, rate_star), rho + (density_rate + density_star) * (dt / 2)


def eulerian_reference_solve(
    rho: DensityState,
    u0: spectral.SpectralField,
    T,
    dt,
    cfl=constants.CFL,
    tol=constants.DEFAULT_TOLERANCE,
) -> EulerianFields:
    """Pseudo-spectral solve of the Eulerian system, kept independent of the Lagrangian pipeline."""
    _check_velocity(rho, u0)
    times = stokes.time_grid(T, dt)
    nu_ref = stokes.reference_viscosity(rho.a, rho.mu)
    stepper = _EulerianStepper(u0.grid, rho.law, nu_ref, cfl, tol)
    u = [u0]
    density = [rho.rho0.values]
    for k in range(len(times) - 1):
        step = float(times[k + 1] - times[k])
        velocity, values = stepper.advance(u[k], density[k], step)
        u.append(velocity)
        density.append(values)
    gradP = [_eulerian_rates(v, d, rho.law, nu_ref, tol)[2] for v, d in zip(u, density)]
    logger.info(f"eulerian reference solve: {len(times) - 1} steps, {stepper.rejections} CFL rejections")
    return EulerianFields(
        times,
        stokes.TimeSeries(times, density),
        stokes.TimeSeries(times, u),
        stokes.TimeSeries(times, gradP),
        {"nu_ref": nu_ref, "cfl_rejections": stepper.rejections},
    )


def residual_check(solution: NSSolution, tol=None, seed=None):
    """Relative L2 defect of d_t u - a (div(mu A D_A(u)) - A^T grad P) at interior nodes, a = 1 / rho_0.

    The momentum balance is read in the form the solver integrates, with the
    same collocation products, so only the time discretisation remains.
    """
    times = solution.times
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    tol = constants.DEFAULT_TOLERANCE if tol is None else tol
    a = solution.rho.a
    mu = solution.rho.mu
    residuals = []
    interior = []
    if len(times) > 2:
        dtu = solution.u.derivative()
        for k in range(1, len(times) - 1):
            A = solution.flows[k].A
            viscous = spectral.multiply(a.values, transported_viscous_term(mu, A, solution.u[k]), dealias=False)
            pressure = spectral.multiply(a.values, transposed_action(A, solution.gradP[k]), dealias=False)
            scale = max(spectral.l2_norm_spectral(x) for x in (dtu[k], viscous, pressure))
            gap = spectral.l2_norm_spectral(dtu[k] - viscous + pressure)
            residuals.append(gap / scale if scale > 0 else gap)
            interior.append(float(times[k]))
    worst = max(residuals) if residuals else 0.0
    measured = worst / (dt ** 2 + tol) if dt > 0 else None
    return reports.report(
        "ns_residual",
        measured,
        measured is None or measured <= RESIDUAL_CONSTANT,
        grid=solution.grid,
        seed=seed,
        parameters={"dt": dt, "tol": tol},
        details={"residuals": residuals, "times": interior, "worst": worst},
    )


def residual_order_check(coarse: NSSolution, refined: NSSolution, tol=None, seed=None):
    """Residual ratio between a run and the same run at half the step, at their shared times."""
    coarse_report = residual_check(coarse, tol, seed)
    refined_report = residual_check(refined, tol, seed)
    order = stokes.time_order(coarse_report, refined_report)
    return reports.report(
        "ns_residual_order",
        order,
        order is None or order >= RESIDUAL_ORDER,
        grid=coarse.grid,
        seed=seed,
        parameters={"dt": coarse_report.parameters["dt"], "bound": RESIDUAL_ORDER},
        details={
            "residual": coarse_report.details["worst"],
            "refined_residual": refined_report.details["worst"],
            "constant": coarse_report.measured_constant,
            "refined_constant": refined_report.measured_constant,
        },
    )


def constraint_check(solution: NSSolution, tol, seed=None):
    """div(A_u u) = 0 at every stored time and det DX_u = 1."""
    constraint = 0.0
    for flow, u in zip(solution.flows, solution.u):
        size = spectral.l2_norm_spectral(spectral.jacobian(u))
        gap = spectral.l2_norm_spectral(lagrange.transported_divergence(flow.A, u))
        constraint = max(constraint, gap / size if size > 0 else gap)
    determinant = max(flow.determinant_defect() for flow in solution.flows)
    bound = max(constants.DETERMINANT_TOLERANCE, 100 * tol)
    return reports.report(
        "ns_constraint",
        constraint,
        constraint <= 10 * tol and determinant <= bound,
        grid=solution.grid,
        seed=seed,
        parameters={"tol": tol},
        details={"determinant_defect": determinant, "determinant_bound": bound},
    )


def smallness_gates(solution: NSSolution, settings: NSSettings, seed=None):
    """Linear part against alpha and the transport velocity against 2 alpha."""
    linear = solution.details.get("linear_smallness", 0.0)
    transport = solution.details.get("transport_smallness", 0.0)
    measured = max(linear / settings.alpha, transport / (2 * settings.alpha))
    return reports.report(
        "ns_smallness",
        measured,
        measured <= 1.0,
        grid=solution.grid,
        seed=seed,
        parameters={"alpha": settings.alpha, "p": settings.p},
        details={"linear": linear, "transport": transport, "T": solution.details.get("T")},
    )


def contraction_check(solution: NSSolution, settings: NSSettings, seed=None):
    bound = constants.CONTRACTION_BOUND + settings.contraction_slack
    return reports.report(
        "ns_contraction",
        solution.contraction,
        solution.contraction is None or solution.contraction <= bound,
        grid=solution.grid,
        seed=seed,
        parameters={"bound": bound, "radius": settings.radius},
        details={
            "ratios": solution.details.get("ratios", []),
            "iterations": solution.iterations,
            "ball": solution.details.get("ball"),
        },
    )


def nonlinear_estimate_check(solution: NSSolution, seed=None):
    """Smallest C with sup ||u|| + int ||(grad^2 u, grad P)|| <= ||u0|| exp(C t) at the stored times."""
    p = solution.p
    idx = besov.BesovIndex.velocity(solution.grid.n, p)
    times = solution.times
    sup = np.maximum.accumulate(solution.u.norms(lambda u: besov.besov_norm(u, idx)))
    rate = [
        besov.besov_norm(spectral.gradient(spectral.gradient(u)), idx) + besov.besov_norm(g, idx)
        for u, g in zip(solution.u, solution.gradP)
    ]
    initial = sup[0]
    lhs = [sup[k] + stokes.time_integral(times[: k + 1], rate[: k + 1]) for k in range(len(times))]
    constant = None
    if initial > 0:
        constant = max(
            (math.log(left / initial) / t for t, left in zip(times[1:], lhs[1:])),
            default=0.0,
        )
    return reports.report(
        "ns_estimate",
        constant,
        constant is None or math.isfinite(constant),
        grid=solution.grid,
        seed=seed,
        parameters={"p": p, "T": solution.T},
        details={"lhs": lhs, "initial": initial, "times": list(times)},
    )


def mass_conservation_check(eulerian: EulerianFields, seed=None):
    masses = [float(rho.mean) * eulerian.grid.volume for rho in eulerian.rho]
    drift = max(abs(m - masses[0]) for m in masses) / abs(masses[0])
    return reports.report(
        "ns_mass",
        drift,
        drift <= MASS_TOLERANCE,
        grid=eulerian.grid,
        seed=seed,
        details={"masses": masses},
    )


def density_range_check(eulerian: EulerianFields, rho: DensityState, seed=None):
    """Transported density stays within [rho_lower, rho_upper] up to the reported overshoot."""
    lower, upper = rho.bounds
    overshoot = 0.0
    for values in eulerian.rho:
        samples = values.physical
        overshoot = max(overshoot, lower - float(np.min(samples)), float(np.max(samples)) - upper)
    slack = DENSITY_RANGE_SLACK * max(upper - lower, 1e-12)
    return reports.report(
        "ns_density_range",
        overshoot,
        overshoot <= slack,
        grid=eulerian.grid,
        seed=seed,
        details={"bounds": [lower, upper], "slack": slack},
    )


def lagrangian_eulerian_distance(
    converted: EulerianFields, reference: EulerianFields, tolerance=EQUIVALENCE_TOLERANCE, seed=None
):
    """Relative L2 distance of the two velocities (and densities) at the final time."""
    size = spectral.l2_norm_spectral(reference.u.final)
    gap = spectral.l2_norm_spectral(converted.u.final - reference.u.final)
    distance = gap / size if size > 0 else gap
    density_gap = spectral.l2_norm_spectral(converted.rho.final - reference.rho.final) / spectral.l2_norm_spectral(
        reference.rho.final
    )
    return reports.report(
        "ns_equivalence",
        distance,
        distance <= tolerance,
        grid=reference.grid,
        seed=seed,
        parameters={"tolerance": tolerance, "T": float(reference.times[-1])},
        details={"density_distance": density_gap, "reference": reference.details, "converted": converted.details},
    )
