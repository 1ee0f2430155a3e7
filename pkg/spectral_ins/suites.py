import collections
import dataclasses
import logging
import math
from typing import Any, Dict, List

import numpy as np

from spectral_ins import besov
from spectral_ins import bony
from spectral_ins import constants
from spectral_ins import elliptic
from spectral_ins import errors
from spectral_ins import lagrange
from spectral_ins import ns_solver
from spectral_ins import random_fields
from spectral_ins import reports
from spectral_ins import spectral
from spectral_ins import stokes

logger = logging.getLogger(__name__)

SCALING_TOLERANCE = 1e-2
RECONSTRUCTION_TOLERANCE = 1e-10
DENSE_POINTS = 4096
DENSE_AGREEMENT = 1e-8
MODE_DECAY_TOLERANCE = 1e-10
CONSTRAINT_TOLERANCE = 1e-12
COMMUTATOR_GAIN = 0.25
TIME_ORDER = 3.5
ESTIMATE_DRIFT = 0.1
PERTURBATION = 0.1


@dataclasses.dataclass
class SuiteResult:
    mode: str
    reports: List[reports.DiagnosticsReport]
    traces: List[besov.NormTrace] = dataclasses.field(default_factory=list)
    snapshots: Dict[str, Any] = dataclasses.field(default_factory=dict)
    details: Dict[str, Any] = dataclasses.field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)

    @property
    def failing(self) -> List[str]:
        return sorted({report.estimate_id for report in self.reports if not report.passed})


def summarize(estimate_id, samples, grid=None, seed=None, parameters=None):
    """One report per estimate: the worst measured constant over the samples."""
    measured = [sample.measured_constant for sample in samples]
    known = [value for value in measured if value is not None]
    finite = [value for value in known if math.isfinite(value)]
    details = {"samples": len(samples), "measured": measured}
    if finite and min(finite) > 0:
        details["spread"] = max(finite) / min(finite)
    if parameters is None:
        parameters = samples[0].parameters if samples else {}
    return reports.report(
        estimate_id,
        max(known) if known else None,
        all(sample.passed for sample in samples),
        grid=grid,
        seed=seed,
        parameters=parameters,
        details=details,
    )


def summarize_all(collected, grid, seed, parameters=None):
    parameters = parameters or {}
    return [
        summarize(estimate_id, samples, grid, seed, parameters.get(estimate_id))
        for estimate_id, samples in collected.items()
    ]


def relative_gap(left: spectral.SpectralField, right: spectral.SpectralField) -> float:
    size = spectral.l2_norm_spectral(right)
    gap = spectral.l2_norm_spectral(left - right)
    return gap / size if size > 0 else gap


def viscosity_law(cfg) -> ns_solver.ViscosityLaw:
    physics = cfg.physics
    return ns_solver.ViscosityLaw(
        name=physics["mu_law"],
        mu0=float(physics["mu0"]),
        slope=float(physics["mu_slope"]),
        exponent=float(physics["mu_exponent"]),
    )


def ns_settings(cfg) -> ns_solver.NSSettings:
    ns = cfg.ns
    return ns_solver.NSSettings(
        T=float(ns["T"]),
        dt=float(ns["dt"]),
        tol=float(ns["tol"]),
        alpha=float(ns["alpha"]),
        radius=float(ns["radius"]),
        T_floor=float(ns["T_floor"]),
        contraction_slack=float(ns["contraction_slack"]),
        cfl=float(ns["cfl"]),
        max_iter=int(ns["max_iter"]),
        p=float(ns["p"]),
    )


def stokes_settings(cfg) -> stokes.StokesSettings:
    settings = cfg.stokes
    return stokes.StokesSettings(
        tol=float(settings["tol"]),
        max_picard=int(settings["max_picard"]),
        homotopy_eps0=float(settings["homotopy_eps0"]),
        splitting_threshold=float(settings["splitting_threshold"]),
        p=float(settings["p"]),
        m=settings.get("m"),
    )


def coefficients(cfg, grid, rng):
    """a and b on the lowest occupied shell."""
    physics = cfg.physics
    oscillation = float(physics["oscillation"])
    shells = random_fields.lowest_shells(grid)
    a = random_fields.coefficient_values(grid, rng, float(physics["a_bar"]), oscillation, shells=shells)
    b = random_fields.coefficient_values(grid, rng, float(physics["b_bar"]), oscillation, shells=shells)
    return elliptic.CoefficientField.from_values(a), elliptic.CoefficientField.from_values(b)


def small_data(cfg, grid, rng):
    """Density state and divergence-free velocity of norm physics.amplitude, both on the lowest occupied shell."""
    physics = cfg.physics
    shells = random_fields.lowest_shells(grid)
    rho = ns_solver.DensityState.random(
        grid, rng, float(physics["rho_bar"]), float(physics["rho_contrast"]), viscosity_law(cfg), shells=shells
    )
    u0 = random_fields.divergence_free(grid, rng, shells=shells, norm=float(physics["amplitude"]))
    return rho, u0


def partition_check(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    rng = random_fields.generator(cfg.seed)
    partition = spectral.build_partition(grid)
    identities = spectral.partition_report(partition)
    passed = (
        identities["sum_defect"] <= constants.PARTITION_TOLERANCE
        and identities["square_sum_min"] >= 0.5 - constants.PARTITION_TOLERANCE
        and identities["square_sum_max"] <= 1.0 + constants.PARTITION_TOLERANCE
        and identities["overlap_max"] <= constants.PARTITION_TOLERANCE
        and identities["support_leak"] <= constants.PARTITION_TOLERANCE
    )
    u = random_fields.band_limited(grid, rng)
    bernstein = spectral.bernstein_check(u)
    inner, outer = constants.PARTITION_INNER, constants.PARTITION_OUTER
    truncation = spectral.truncation_report(u)
    return SuiteResult(
        cfg.mode,
        [
            reports.report("partition_identity", identities["sum_defect"], passed, grid=grid, seed=cfg.seed, details=identities),
            reports.report(
                "bernstein",
                bernstein["upper"],
                bernstein["lower"] is not None
                and bernstein["lower"] >= inner - 1e-9
                and bernstein["upper"] <= outer + 1e-9,
                grid=grid,
                seed=cfg.seed,
                parameters={"p": 2.0, "inner": inner, "outer": outer},
                details=bernstein,
            ),
            reports.report("truncation", truncation["out_of_band"], True, grid=grid, seed=cfg.seed, details=truncation),
        ],
    )


def default_indices(n, p, r):
    return [
        besov.BesovIndex(n / p - 1, p, r),
        besov.BesovIndex(n / p, p, r),
        besov.BesovIndex(n / 3 - 1, 3.0, r),
    ]


def besov_suite(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    n = grid.n
    rng = random_fields.generator(cfg.seed)
    p, r = float(cfg.besov["p"]), float(cfg.besov["r"])
    indices = [besov.BesovIndex(*triple) for triple in cfg.besov["indices"]] or default_indices(n, p, r)
    physics = cfg.physics
    collected = collections.defaultdict(list)
    for _ in range(int(cfg.besov["samples"])):
        u = random_fields.band_limited(grid, rng, decay=0.5)
        for idx in indices:
            parameters = idx.to_dict()
            scaling = besov.scaling_check(u, idx)
            collected["besov_scaling"].append(
                reports.report(
                    "besov_scaling", scaling["relative_error"], scaling["relative_error"] <= SCALING_TOLERANCE,
                    parameters=parameters, details=scaling,
                )
            )
            monotone = besov.monotonicity_check(u, idx.s, idx.p, 1.0, math.inf)
            collected["besov_monotonicity"].append(
                reports.report(
                    "besov_monotonicity", reports.ratio(monotone["r2_norm"], monotone["r1_norm"]), monotone["passed"],
                    parameters=parameters,
                )
            )
            embedding = besov.embedding_check(u, idx.s, idx.p, 2 * idx.p, idx.r)
            constant = embedding["constant"]
            collected["besov_embedding"].append(
                reports.report(
                    "besov_embedding", constant, constant is None or math.isfinite(constant), parameters=parameters
                )
            )
            interpolation = besov.interpolation_check(u, idx.s - 0.5, idx.s + 0.5, 0.5, idx.p, idx.r)
            collected["besov_interpolation"].append(
                reports.report(
                    "besov_interpolation",
                    reports.ratio(interpolation["lhs"], interpolation["rhs"]),
                    interpolation["passed"],
                    parameters=parameters,
                )
            )
        rho = random_fields.coefficient_values(
            grid, rng, float(physics["rho_bar"]), float(physics["rho_contrast"])
        )
        velocity = random_fields.divergence_free(grid, rng, decay=0.5)
        critical = besov.critical_scaling_check(rho, velocity, p)
        ratios = [value for value in (critical["velocity_ratio"], critical["density_ratio"]) if value is not None]
        drift = max((abs(value - 1) for value in ratios), default=0.0)
        collected["critical_scaling"].append(
            reports.report("critical_scaling", drift, drift <= SCALING_TOLERANCE, parameters={"p": p}, details=critical)
        )
    parameters = {
        estimate_id: {"indices": [idx.to_dict() for idx in indices]}
        for estimate_id in ["besov_scaling", "besov_monotonicity", "besov_embedding", "besov_interpolation"]
    }
    return SuiteResult(cfg.mode, summarize_all(collected, grid, cfg.seed, parameters))


def commutator_gain(A, a, w, s, p=2.0, seed=None):
    """||[A(D), a] w||_{B^{s+1}_{p,1}} against the gain-free bound ||a - a_bar||_inf ||w||_{B^{s+1}_{p,1}}."""
    idx = besov.BesovIndex(s + 1, p, 1)
    lhs = besov.besov_norm(bony.multiplier_commutator(A, a, w), idx)
    rhs = spectral.lp_norm(a.without_mean(), math.inf) * besov.besov_norm(w, idx)
    gain = reports.ratio(lhs, rhs)
    return reports.report(
        "commutator_gain",
        gain,
        gain is None or gain <= COMMUTATOR_GAIN,
        grid=a.grid,
        seed=seed,
        parameters={"multiplier": A.name, "s": s, "p": p, "bound": COMMUTATOR_GAIN},
        details={"lhs": lhs, "rhs": rhs},
    )


def bony_suite(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    n = grid.n
    rng = random_fields.generator(cfg.seed)
    p = float(cfg.bony["p"])
    partition = spectral.build_partition(grid)
    A = spectral.leray_component(0, 0)
    s = n / p - 1
    nu = (n / p + min(n / p, n * (1 - 1 / p))) / 4
    collected = collections.defaultdict(list)
    for _ in range(int(cfg.bony["samples"])):
        u = random_fields.band_limited(grid, rng)
        v = random_fields.band_limited(grid, rng)
        defect = bony.bony_split(u, v).defect(spectral.multiply(u, v))
        collected["bony_reconstruction"].append(
            reports.report("bony_reconstruction", defect, defect <= RECONSTRUCTION_TOLERANCE)
        )
        collected["paraproduct"].append(bony.paraproduct_check(u, v, s, p))
        collected["remainder"].append(bony.remainder_check(u, v, n / (2 * p), n / (2 * p), p))
        collected["product"].append(bony.product_estimate_check(u, v, nu, nu, p))

        a = random_fields.coefficient_values(grid, rng, 1.0, float(cfg.physics["oscillation"]))
        w = random_fields.band_limited(grid, rng)
        for j in partition.indices:
            collected["block_commutator"].append(bony.block_commutator_check(a, w, j))
        collected["multiplier_commutator"].append(bony.multiplier_commutator_check(A, a, w, s, 1.0, p))
        collected["paraproduct_commutator"].append(bony.paraproduct_commutator_gain(A, a, w, s, p))
        collected["derivative_block_commutator"].append(
            bony.derivative_block_commutator(a, w, 0, s, min(1.0, n / p), p)
        )
        low = spectral.fourier_mode(grid, (1,) + (0,) * (n - 1), rng.uniform(0.5, 1.5))
        high = random_fields.band_limited(grid, rng, shells=[partition.j_max])
        collected["commutator_gain"].append(commutator_gain(A, low, high, s, p))
    return SuiteResult(cfg.mode, summarize_all(collected, grid, cfg.seed))


def elliptic_suite(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    n = grid.n
    rng = random_fields.generator(cfg.seed)
    settings = cfg.elliptic
    tol, max_iter = float(settings["tol"]), int(settings["max_iter"])
    p, q, regime = float(settings["p"]), float(settings["q"]), settings["regime"]
    physics = cfg.physics
    collected = collections.defaultdict(list)
    for _ in range(int(settings["samples"])):
        a = elliptic.CoefficientField.from_values(
            random_fields.coefficient_values(grid, rng, float(physics["a_bar"]), float(physics["oscillation"]))
        )
        f = random_fields.band_limited(grid, rng, shape=(n,), decay=0.5, norm=1.0)
        solution = elliptic.solve_pressure(a, f, tol, max_iter)
        collected["pressure_solve"].append(
            reports.report(
                "pressure_solve", solution.iterations, solution.residual <= 10 * tol,
                parameters={"tol": tol}, details=solution.to_dict(),
            )
        )
        if grid.points <= DENSE_POINTS:
            dense = elliptic.dense_pressure_solve(a, f)
            gap = relative_gap(solution.gradP, dense.gradP)
            collected["pressure_dense_agreement"].append(
                reports.report("pressure_dense_agreement", gap, gap <= DENSE_AGREEMENT)
            )
        collected["pressure_l2"].append(elliptic.l2_bound_check(a, f, solution))
        if elliptic.regime_admissible(regime, n, p, q):
            collected[f"pressure_besov_{regime}"].append(
                elliptic.besov_bound_check(a, f, solution, regime, p, q)
            )
        else:
            logger.warning(f"regime {regime} is not admissible for n={n}, p={p}, q={q}; skipping the bound")
        psi = random_fields.band_limited(grid, rng, decay=1.0)
        collected["self_adjointness"].append(
            elliptic.self_adjointness_check(a.values, solution.gradP, spectral.gradient(psi))
        )
        dual = random_fields.band_limited(grid, rng, shape=(n,), decay=1.0)
        collected["duality_uniqueness"].append(elliptic.duality_uniqueness_check(a, f, solution, dual, tol))
    result = summarize_all(collected, grid, cfg.seed)
    sweep = elliptic.contraction_sweep(
        grid, float(physics["a_bar"]), [float(x) for x in settings["oscillations"]], cfg.seed
    )
    result.append(
        reports.report(
            "elliptic_contraction_sweep",
            sweep["largest_contracting_oscillation"],
            sweep["admissible"],
            grid=grid,
            seed=cfg.seed,
            parameters={"a_bar": float(physics["a_bar"])},
            details=sweep,
        )
    )
    return SuiteResult(cfg.mode, result)


def decaying_mode(grid, amplitude=1.0):
    """(0, cos x_1[, 0]): divergence free on |k| = k0."""
    k = (1,) + (0,) * (grid.n - 1)
    direction = np.zeros(grid.n)
    direction[1] = 1.0
    return spectral.fourier_mode(grid, k, amplitude, direction=direction)


def stokes_const(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    n = grid.n
    rng = random_fields.generator(cfg.seed)
    physics, settings = cfg.physics, cfg.stokes
    a_bar, b_bar = float(physics["a_bar"]), float(physics["b_bar"])
    T, dt, tol, p = float(settings["T"]), float(settings["dt"]), float(settings["tol"]), float(settings["p"])
    a = elliptic.CoefficientField.constant(grid, a_bar)
    b = elliptic.CoefficientField.constant(grid, b_bar)

    u0 = decaying_mode(grid)
    data = stokes.StokesData.from_callables(u0, T, dt)
    mode = stokes.constant_stokes_solve(data, a_bar, b_bar, p)
    rate = a_bar * b_bar * grid.k0 ** 2
    decay = max(relative_gap(u, u0 * math.exp(-rate * t)) for t, u in zip(mode.times, mode.u))

    phi = random_fields.band_limited(grid, rng, decay=1.0, norm=1.0)
    gradient = spectral.gradient(phi)
    w0 = random_fields.divergence_free(grid, rng, decay=1.0, norm=1.0)
    f0 = random_fields.band_limited(grid, rng, shape=(n,), decay=1.0, norm=1.0)
    driven = stokes.StokesData.from_callables(
        w0, T, dt,
        forcing=lambda t: f0 * (1 + t),
        constraint=lambda t: gradient * t,
        constraint_rate=lambda t: gradient,
    )
    solution = stokes.constant_stokes_solve(driven, a_bar, b_bar, p)
    constraint = 0.0
    for k, u in enumerate(solution.u):
        scale = max(1.0, spectral.l2_norm_spectral(spectral.gradient_part(driven.R[k])))
        gap = spectral.l2_norm_spectral(spectral.gradient_part(u) - spectral.gradient_part(driven.R[k]))
        constraint = max(constraint, gap / scale)

    return SuiteResult(
        cfg.mode,
        [
            reports.report(
                "stokes_mode_decay", decay, decay <= MODE_DECAY_TOLERANCE, grid=grid, seed=cfg.seed,
                parameters={"a_bar": a_bar, "b_bar": b_bar, "rate": rate},
            ),
            reports.report(
                "stokes_constraint", constraint, constraint <= CONSTRAINT_TOLERANCE, grid=grid, seed=cfg.seed
            ),
            stokes.apriori_estimate_check(solution, driven, a, b, seed=cfg.seed),
            stokes.residual_check(mode, data, a, b, tol, seed=cfg.seed),
        ],
        mode.trace_list("mode_") + solution.trace_list("driven_"),
        {"u_final": solution.u.final, "gradP_final": solution.gradP.final},
    )


def smooth_data(grid, rng, T, dt):
    """Unit velocity and forcing f0 (1 + t) on the lowest occupied shell."""
    shells = random_fields.lowest_shells(grid)
    u0 = random_fields.divergence_free(grid, rng, shells=shells, norm=1.0)
    f0 = random_fields.band_limited(grid, rng, shape=(grid.n,), shells=shells, norm=1.0)
    forcing = lambda t: f0 * (1 + t)
    return u0, forcing, stokes.StokesData.from_callables(u0, T, dt, forcing=forcing)


def splitting_reports(a, b, settings: stokes.StokesSettings, seed):
    try:
        splitting = stokes.splitting_diagnostics(a, b, settings.m, settings.p, settings.splitting_threshold, seed)
    except errors.SplittingUnreachable as error:
        logger.warning(str(error))
        return [
            reports.report(
                "stokes_splitting", error.best, False, grid=a.grid, seed=seed,
                parameters={"threshold": error.threshold, "p": settings.p},
            )
        ]
    result = [splitting]
    if settings.m is not None:
        at_m = splitting.details["at_m"]
        result.append(
            reports.report(
                "stokes_splitting_at_m", at_m["T1"], True, grid=a.grid, seed=seed,
                parameters={"m": settings.m, "p": settings.p}, details=at_m,
            )
        )
    return result


def stokes_var(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    rng = random_fields.generator(cfg.seed)
    settings = stokes_settings(cfg)
    a, b = coefficients(cfg, grid, rng)
    result = splitting_reports(a, b, settings, cfg.seed)
    if cfg.stokes["diagnostics_only"]:
        return SuiteResult(cfg.mode, result)

    T, dt = float(cfg.stokes["T"]), float(cfg.stokes["dt"])
    u0, forcing, data = smooth_data(grid, rng, T, dt)
    solution = stokes.variable_stokes_solve(data, a, b, settings)
    apriori = stokes.apriori_estimate_check(solution, data, a, b, seed=cfg.seed)
    residual = stokes.residual_check(solution, data, a, b, settings.tol, seed=cfg.seed)
    result += [
        apriori,
        residual,
        stokes.pressure_gain_check(solution, a, seed=cfg.seed),
        stokes.uniqueness_check(data, a, b, settings, seed=cfg.seed),
    ]

    halved = stokes.StokesData.from_callables(u0, T, dt / 2, forcing=forcing)
    refined = stokes.variable_stokes_solve(halved, a, b, settings)
    refined_residual = stokes.residual_check(refined, halved, a, b, settings.tol, seed=cfg.seed)
    order = stokes.time_order(residual, refined_residual)
    result.append(
        reports.report(
            "stokes_time_order", order, order is None or order >= TIME_ORDER, grid=grid, seed=cfg.seed,
            parameters={"dt": dt, "bound": TIME_ORDER},
            details={"residual": residual.measured_constant, "refined_residual": refined_residual.measured_constant},
        )
    )
    refined_apriori = stokes.apriori_estimate_check(refined, halved, a, b, seed=cfg.seed)
    drift = None
    if apriori.measured_constant is not None and refined_apriori.measured_constant is not None:
        C, C_half = apriori.measured_constant, refined_apriori.measured_constant
        drift = abs(C - C_half) / max(abs(C), abs(C_half), 1.0)
    result.append(
        reports.report(
            "stokes_estimate_stability", drift, drift is None or drift < ESTIMATE_DRIFT, grid=grid, seed=cfg.seed,
            parameters={"dt": dt},
            details={"constant": apriori.measured_constant, "refined_constant": refined_apriori.measured_constant},
        )
    )
    return SuiteResult(
        cfg.mode,
        result,
        solution.trace_list(),
        {"u_final": solution.u.final, "gradP_final": solution.gradP.final},
        {"homotopy": solution.details.get("homotopy", []), "nu_ref": solution.details.get("nu_ref")},
    )


def lagrange_suite(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    n = grid.n
    rng = random_fields.generator(cfg.seed)
    settings = ns_settings(cfg)
    order = int(cfg.lagrange["taylor_order"])
    alpha = float(cfg.lagrange["alpha"])
    p = settings.p
    rho, u0 = small_data(cfg, grid, rng)
    solution = ns_solver.nonlinear_solve(rho, u0, settings)
    flows = [solution.flows[len(solution.flows) // 2], solution.flows[-1]]
    collected = collections.defaultdict(list)
    for flow in flows:
        collected["flow_invariants"].append(lagrange.flow_invariants_check(flow, settings.tol))
        collected["flow_round_trip"].append(lagrange.round_trip_check(flow, lagrange.inverse_flow(flow)))
        for _ in range(int(cfg.lagrange["samples"])):
            H = random_fields.band_limited(grid, rng, shape=(n,), decay=1.0)
            K = random_fields.band_limited(grid, rng, decay=1.0)
            collected["transported_operators"].append(lagrange.transported_operators(H, K, flow, order=order))
    result = summarize_all(collected, grid, cfg.seed)

    v1 = solution.u
    delta = random_fields.divergence_free(
        grid, rng, decay=1.0, norm=PERTURBATION * float(cfg.physics["amplitude"])
    )
    v2 = stokes.TimeSeries(v1.times, [u + delta for u in v1])
    result += [
        dataclasses.replace(report, seed=cfg.seed)
        for report in lagrange.stability_bounds_check(v1, v2, p, alpha)
    ]
    a = random_fields.band_limited(grid, rng, decay=1.0)
    for s in [n / p - 1, n / p]:
        result.append(lagrange.composition_bound_check(a, flows[-1], s, p, order, seed=cfg.seed))
    return SuiteResult(
        cfg.mode,
        result,
        solution.trace_list(),
        {"flow_final": flows[-1]},
        {"T": solution.T},
    )


def nearest_index(times, t):
    return int(np.argmin(np.abs(np.asarray(times) - t)))


def _ns_reports(cfg, rho, solution, settings):
    return [
        ns_solver.residual_check(solution, settings.tol, seed=cfg.seed),
        ns_solver.constraint_check(solution, settings.tol, seed=cfg.seed),
        ns_solver.smallness_gates(solution, settings, seed=cfg.seed),
        ns_solver.contraction_check(solution, settings, seed=cfg.seed),
        ns_solver.nonlinear_estimate_check(solution, seed=cfg.seed),
        rho.composition_check(settings.p, seed=cfg.seed),
    ]


def _ns_snapshots(cfg, solution):
    result = {}
    for t in cfg.ns["snapshot_times"]:
        k = nearest_index(solution.times, float(t))
        result[f"u_t={float(solution.times[k]):g}"] = solution.u[k]
    result["u_final"] = solution.u.final
    result["gradP_final"] = solution.gradP.final
    result["flow_final"] = solution.flows[-1]
    return result


def ns_local(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    rng = random_fields.generator(cfg.seed)
    settings = ns_settings(cfg)
    rho, u0 = small_data(cfg, grid, rng)
    solution = ns_solver.nonlinear_solve(rho, u0, settings)
    refined = ns_solver.nonlinear_solve(rho, u0, dataclasses.replace(settings, dt=settings.dt / 2))
    return SuiteResult(
        cfg.mode,
        _ns_reports(cfg, rho, solution, settings)
        + [ns_solver.residual_order_check(solution, refined, settings.tol, seed=cfg.seed)],
        solution.trace_list(),
        _ns_snapshots(cfg, solution),
        {"T": solution.T, "iterations": solution.iterations},
    )


def ns_crosscheck(cfg) -> SuiteResult:
    grid = cfg.build_grid()
    rng = random_fields.generator(cfg.seed)
    settings = ns_settings(cfg)
    rho, u0 = small_data(cfg, grid, rng)
    solution = ns_solver.nonlinear_solve(rho, u0, settings)
    converted = ns_solver.to_eulerian(solution)
    times = solution.times
    dt = float(times[1] - times[0]) if len(times) > 1 else settings.dt
    reference = ns_solver.eulerian_reference_solve(
        rho, u0, solution.T, dt, settings.cfl, float(cfg.elliptic["tol"])
    )
    result = _ns_reports(cfg, rho, solution, settings) + [
        ns_solver.lagrangian_eulerian_distance(converted, reference, seed=cfg.seed),
        ns_solver.mass_conservation_check(converted, seed=cfg.seed),
        dataclasses.replace(
            ns_solver.mass_conservation_check(reference, seed=cfg.seed), estimate_id="ns_mass_reference"
        ),
        ns_solver.density_range_check(converted, rho, seed=cfg.seed),
    ]
    snapshots = _ns_snapshots(cfg, solution)
    snapshots["eulerian_u_final"] = converted.u.final
    snapshots["reference_u_final"] = reference.u.final
    return SuiteResult(
        cfg.mode,
        result,
        solution.trace_list("lagrangian_"),
        snapshots,
        {"T": solution.T, "iterations": solution.iterations, "reference": reference.details},
    )


SUITES = {
    constants.MODE_PARTITION_CHECK: partition_check,
    constants.MODE_BESOV_SUITE: besov_suite,
    constants.MODE_BONY_SUITE: bony_suite,
    constants.MODE_ELLIPTIC: elliptic_suite,
    constants.MODE_STOKES_CONST: stokes_const,
    constants.MODE_STOKES_VAR: stokes_var,
    constants.MODE_LAGRANGE_SUITE: lagrange_suite,
    constants.MODE_NS_LOCAL: ns_local,
    constants.MODE_NS_CROSSCHECK: ns_crosscheck,
}


SETTINGS_SECTIONS = {
    constants.MODE_PARTITION_CHECK: ["grid"],
    constants.MODE_BESOV_SUITE: ["grid", "besov", "physics"],
    constants.MODE_BONY_SUITE: ["grid", "bony", "physics"],
    constants.MODE_ELLIPTIC: ["grid", "elliptic", "physics"],
    constants.MODE_STOKES_CONST: ["grid", "stokes", "physics"],
    constants.MODE_STOKES_VAR: ["grid", "stokes", "physics"],
    constants.MODE_LAGRANGE_SUITE: ["grid", "lagrange", "ns", "physics"],
    constants.MODE_NS_LOCAL: ["grid", "ns", "physics"],
    constants.MODE_NS_CROSSCHECK: ["grid", "ns", "elliptic", "physics"],
}

DATA_SOURCES = {
    constants.MODE_PARTITION_CHECK: {"u": "band_limited on every shell, flat spectrum"},
    constants.MODE_BESOV_SUITE: {
        "u": "band_limited on every shell, decay 1/2",
        "rho": "coefficient_values on the low shells",
        "velocity": "divergence_free on every shell, decay 1/2",
    },
    constants.MODE_BONY_SUITE: {
        "u, v, w": "band_limited on every shell, flat spectrum",
        "a": "coefficient_values on the low shells",
        "low, high": "fourier_mode at |k| = k0 against band_limited on the top shell",
    },
    constants.MODE_ELLIPTIC: {
        "a": "coefficient_values on the low shells",
        "f": "band_limited vector on every shell, decay 1/2, unit norm",
        "psi, dual": "band_limited on every shell, decay 1",
    },
    constants.MODE_STOKES_CONST: {
        "u0": "decaying_mode at |k| = k0",
        "w0, f0, phi": "divergence_free and band_limited on every shell, decay 1, unit norm",
    },
    constants.MODE_STOKES_VAR: {
        "a, b": "coefficient_values on the lowest occupied shell",
        "u0, f0": "divergence_free and band_limited on the lowest occupied shell, unit norm",
    },
    constants.MODE_LAGRANGE_SUITE: {
        "rho0, u0": "DensityState.random and divergence_free on the lowest occupied shell",
        "H, K, a": "band_limited on every shell, decay 1",
        "delta": "divergence_free on every shell, decay 1",
    },
    constants.MODE_NS_LOCAL: {"rho0, u0": "DensityState.random and divergence_free on the lowest occupied shell"},
    constants.MODE_NS_CROSSCHECK: {
        "rho0, u0": "DensityState.random and divergence_free on the lowest occupied shell"
    },
}


def provenance_of(cfg) -> Dict[str, Any]:
    """Seed stream, data generators and settings behind every report of a run."""
    grid = cfg.build_grid()
    return {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "generator": "numpy.random.default_rng",
        "grid": grid.to_dict(),
        "lowest_shells": random_fields.lowest_shells(grid, 2),
        "data": DATA_SOURCES.get(cfg.mode, {}),
        "settings": {section: dict(getattr(cfg, section)) for section in SETTINGS_SECTIONS.get(cfg.mode, [])},
    }


def run_suite(cfg) -> SuiteResult:
    if cfg.mode not in SUITES:
        raise errors.ConfigError(f"unknown mode {cfg.mode}", field="mode")
    logger.info(f"running {cfg.mode} on {cfg.build_grid()} with seed {cfg.seed}")
    result = SUITES[cfg.mode](cfg)
    provenance = provenance_of(cfg)
    result.reports = [
        dataclasses.replace(report, provenance={**provenance, **report.provenance}) for report in result.reports
    ]
    logger.info(f"{cfg.mode}: {len(result.reports)} reports, failing {result.failing}")
    return result
