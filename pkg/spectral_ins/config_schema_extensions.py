import logging

from spectral_ins import constants
from spectral_ins import elliptic
from spectral_ins import stokes

logger = logging.getLogger(__name__)

MIN_CONFIG_POINTS = 16


def ext_config(value, rule_obj, path):
    ensure_grid_is_resolvable(value)
    ensure_velocity_exponents_admissible(value)
    ensure_horizons_are_ordered(value)
    ensure_elliptic_regime_admissible(value)
    ensure_viscosity_law_is_positive(value)
    return True


def _number(*values):
    return all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values)


def _fail(field, message):
    raise AssertionError(f"{field}: {message}")


def ensure_grid_is_resolvable(value):
    grid = value.get("grid", {})
    N = grid.get("N")
    if not _number(N) or N < MIN_CONFIG_POINTS or N & (N - 1) != 0:
        _fail("grid.N", f"must be a power of two and at least {MIN_CONFIG_POINTS}, got {N}")


def ensure_velocity_exponents_admissible(value):
    n = value.get("grid", {}).get("n", 2)
    for section in ["stokes", "ns"]:
        p = value.get(section, {}).get("p")
        if _number(n, p) and not stokes.admissible_p(n, p):
            _fail(f"{section}.p", f"p={p} outside the admissible range for n={n}")


def ensure_horizons_are_ordered(value):
    for section in ["stokes", "ns"]:
        settings = value.get(section, {})
        dt, T = settings.get("dt"), settings.get("T")
        if _number(dt, T) and dt > T:
            _fail(f"{section}.dt", f"step {dt} exceeds the horizon {T}")
    ns = value.get("ns", {})
    if _number(ns.get("T_floor"), ns.get("T")) and ns["T_floor"] > ns["T"]:
        _fail("ns.T_floor", f"floor {ns['T_floor']} exceeds the horizon {ns['T']}")
    for t in ns.get("snapshot_times", []) or []:
        if _number(t, ns.get("T")) and t > ns["T"]:
            _fail("ns.snapshot_times", f"snapshot time {t} after the horizon {ns['T']}")


def ensure_elliptic_regime_admissible(value):
    settings = value.get("elliptic", {})
    n = value.get("grid", {}).get("n", 2)
    regime, p, q = settings.get("regime"), settings.get("p"), settings.get("q")
    if regime is not None and _number(n, p, q) and not elliptic.regime_admissible(regime, n, p, q):
        _fail("elliptic.regime", f"{regime} is not admissible for n={n}, p={p}, q={q}")


def ensure_viscosity_law_is_positive(value):
    physics = value.get("physics", {})
    if physics.get("mu_law") != constants.MU_LAW_LINEAR:
        return
    rho_bar = physics.get("rho_bar", 1.0)
    contrast = physics.get("rho_contrast", 0.0)
    slope = physics.get("mu_slope", 0.0)
    if not _number(rho_bar, contrast, slope):
        return
    if 1 - abs(slope) * rho_bar * contrast <= 0:
        _fail("physics.mu_slope", f"linear law with slope {slope} is not positive on the density range")
