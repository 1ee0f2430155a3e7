import dataclasses
import logging
import math

from spectral_ins import besov
from spectral_ins import errors
from spectral_ins import reports
from spectral_ins import spectral

logger = logging.getLogger(__name__)

EXPONENT_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True)
class BonySplit:
    T_uv: spectral.SpectralField
    T_vu: spectral.SpectralField
    R_uv: spectral.SpectralField

    def reconstruction(self) -> spectral.SpectralField:
        return self.T_uv + self.T_vu + self.R_uv

    def defect(self, product: spectral.SpectralField) -> float:
        """Relative L2 distance between the three pieces and ``product``."""
        size = spectral.l2_norm_spectral(product)
        gap = spectral.l2_norm_spectral(self.reconstruction() - product)
        return gap / size if size > 0 else gap


def _masked(u, mask):
    return u.with_fourier(u.fourier * mask)


def paraproduct(u: spectral.SpectralField, v: spectral.SpectralField) -> spectral.SpectralField:
    """sum_j S_{j-1} u . D_j v over the resolved shells, each product dealiased."""
    u._check(v)
    partition = spectral.build_partition(u.grid)
    total = None
    for j in partition.indices:
        term = spectral.multiply(
            _masked(u, partition.low_mask(j - 1)), _masked(v, partition.mask(j))
        )
        total = term if total is None else total + term
    return total


def remainder(u: spectral.SpectralField, v: spectral.SpectralField) -> spectral.SpectralField:
    """sum_j D_j u . (D_{j-1} + D_j + D_{j+1}) v, each product dealiased."""
    u._check(v)
    partition = spectral.build_partition(u.grid)
    total = None
    for j in partition.indices:
        term = spectral.multiply(
            _masked(u, partition.mask(j)), _masked(v, partition.neighbour_mask(j))
        )
        total = term if total is None else total + term
    return total


def bony_split(u, v) -> BonySplit:
    """Exact on band-limited pairs with at least one mean-zero factor."""
    return BonySplit(paraproduct(u, v), paraproduct(v, u), remainder(u, v))


def _check_holder(p, q, r):
    if abs(1 / r - (1 / p + 1 / q)) > EXPONENT_TOLERANCE or 1 / r > 1 + EXPONENT_TOLERANCE:
        raise errors.InvalidIndexError(f"exponent mismatch: 1/{r} != 1/{p} + 1/{q}")


def _product_exponent(p, q):
    inverse = 1 / p + 1 / q
    return math.inf if inverse == 0 else 1 / inverse


def block_commutator(a, b, j) -> spectral.SpectralField:
    """[D_j, a] b = D_j(ab) - a D_j b."""
    a._check(b)
    partition = spectral.build_partition(a.grid)
    mask = partition.mask(j)
    return _masked(spectral.multiply(a, b), mask) - spectral.multiply(a, _masked(b, mask))


def block_commutator_check(a, b, j, p=math.inf, q=2.0, r=None, seed=None):
    r = _product_exponent(p, q) if r is None else r
    _check_holder(p, q, r)
    commutator = block_commutator(a, b, j)
    lhs = 2.0 ** j * spectral.lp_norm(commutator, r)
    rhs = spectral.lp_norm(spectral.gradient(a), p) * spectral.lp_norm(b, q)
    constant = reports.ratio(lhs, rhs)
    return reports.report(
        "block_commutator",
        constant,
        constant is None or math.isfinite(constant),
        grid=a.grid,
        seed=seed,
        parameters={"j": j, "p": p, "q": q, "r": r},
        details={"lhs": lhs, "rhs": rhs},
    )


def _check_degree_zero(A: spectral.Multiplier):
    if A.degree != 0:
        raise errors.InvalidIndexError(f"multiplier {A.name} has degree {A.degree}, need 0")


def multiplier_commutator(A: spectral.Multiplier, a, w) -> spectral.SpectralField:
    """A(D)(a w) - a A(D) w."""
    _check_degree_zero(A)
    a._check(w)
    return spectral.apply_multiplier(A, spectral.multiply(a, w)) - spectral.multiply(
        a, spectral.apply_multiplier(A, w)
    )


def multiplier_commutator_check(A, a, w, s, nu, p=2.0, r1=1.0, r2=1.0, seed=None):
    """One derivative gained by [A(D), a]: its B^{s+1} norm against grad a and w."""
    _check_degree_zero(A)
    if not 0 < nu <= 1:
        raise errors.InvalidIndexError(f"nu={nu} outside (0, 1]")
    n = a.grid.n
    r = _product_exponent(r1, r2)
    commutator = multiplier_commutator(A, a, w)
    lhs = besov.besov_norm(commutator, besov.BesovIndex(s + 1, p, max(r, 1.0)))
    rhs = besov.besov_norm(
        spectral.gradient(a), besov.BesovIndex(n / p - nu, p, r1)
    ) * besov.besov_norm(w, besov.BesovIndex(s + nu, p, r2))
    paraproduct_part = paraproduct_commutator(A, a, w)
    constant = reports.ratio(lhs, rhs)
    return reports.report(
        "multiplier_commutator",
        constant,
        constant is None or math.isfinite(constant),
        grid=a.grid,
        seed=seed,
        parameters={"multiplier": A.name, "s": s, "nu": nu, "p": p, "r1": r1, "r2": r2},
        details={
            "lhs": lhs,
            "rhs": rhs,
            "paraproduct_only": besov.besov_norm(
                paraproduct_part, besov.BesovIndex(s + 1, p, max(r, 1.0))
            ),
        },
    )


def paraproduct_commutator(A, a, w) -> spectral.SpectralField:
    """[A(D), T_a] w."""
    _check_degree_zero(A)
    return spectral.apply_multiplier(A, paraproduct(a, w)) - paraproduct(
        a, spectral.apply_multiplier(A, w)
    )


def paraproduct_commutator_gain(A, a, w, s, p=2.0, seed=None):
    """Per-shell 2^{j(s+1)} ||D_j [A(D), T_a] w||_p and its l1 sum against ||grad a||_inf ||w||_{B^s_{p,1}}."""
    commutator = paraproduct_commutator(A, a, w)
    sequence = {
        j: 2.0 ** (j * (s + 1)) * spectral.lp_norm(block, p)
        for j, block in spectral.dyadic_blocks(commutator).items()
    }
    lhs = sum(sequence.values())
    rhs = spectral.lp_norm(spectral.gradient(a), math.inf) * besov.besov_norm(
        w, besov.BesovIndex(s, p, 1)
    )
    constant = reports.ratio(lhs, rhs)
    return reports.report(
        "paraproduct_commutator",
        constant,
        constant is None or math.isfinite(constant),
        grid=a.grid,
        seed=seed,
        parameters={"multiplier": A.name, "s": s, "p": p},
        details={"sequence": sequence, "lhs": lhs, "rhs": rhs},
    )


def derivative_block_commutator(a, w, l, s, nu, p=2.0, seed=None):
    """c_j = 2^{js} ||d_l [a, D_j] w||_p / (||grad a||_{B^{n/p-nu}_{p,1}} ||w||_{B^{s+nu}_{p,1}})."""
    n = a.grid.n
    if not 0 <= nu <= n / p:
        raise errors.InvalidIndexError(f"nu={nu} outside [0, {n / p}]")
    partition = spectral.build_partition(a.grid)
    scale = besov.besov_norm(
        spectral.gradient(a), besov.BesovIndex(n / p - nu, p, 1)
    ) * besov.besov_norm(w, besov.BesovIndex(s + nu, p, 1))
    derivative = spectral.partial(l)
    sequence = {}
    for j in partition.indices:
        commutator = -block_commutator(a, w, j)
        size = spectral.lp_norm(spectral.apply_multiplier(derivative, commutator), p)
        sequence[j] = 2.0 ** (j * s) * size / scale if scale > 0 else 0.0
    total = sum(sequence.values())
    return reports.report(
        "derivative_block_commutator",
        total,
        math.isfinite(total),
        grid=a.grid,
        seed=seed,
        parameters={"l": l, "s": s, "nu": nu, "p": p},
        details={"sequence": sequence},
    )


def paraproduct_check(f, g, s, p=2.0, seed=None):
    """||T_f g||_{B^s_{p,1}} against ||f||_inf ||g||_{B^s_{p,1}}."""
    idx = besov.BesovIndex(s, p, 1)
    if not idx.banach_gate(f.grid.n):
        raise errors.InvalidIndexError(f"paraproduct bound needs s <= n/p, got s={s}, p={p}")
    lhs = besov.besov_norm(paraproduct(f, g), idx)
    rhs = spectral.lp_norm(f, math.inf) * besov.besov_norm(g, idx)
    constant = reports.ratio(lhs, rhs)
    return reports.report(
        "paraproduct",
        constant,
        constant is None or math.isfinite(constant),
        grid=f.grid,
        seed=seed,
        parameters={"s": s, "p": p},
        details={"lhs": lhs, "rhs": rhs},
    )


def remainder_check(f, g, s1, s2, p=2.0, p1=None, p2=None, seed=None):
    """||R(f, g)||_{B^{s1+s2}_{p,1}} against ||f||_{B^{s1}_{p1,1}} ||g||_{B^{s2}_{p2,1}}."""
    p1 = 2 * p if p1 is None else p1
    p2 = 2 * p if p2 is None else p2
    _check_holder(p1, p2, p)
    s = s1 + s2
    if not 0 < s <= f.grid.n / p:
        raise errors.InvalidIndexError(f"remainder bound needs 0 < s1+s2 <= n/p, got {s}")
    lhs = besov.besov_norm(remainder(f, g), besov.BesovIndex(s, p, 1))
    rhs = besov.besov_norm(f, besov.BesovIndex(s1, p1, 1)) * besov.besov_norm(
        g, besov.BesovIndex(s2, p2, 1)
    )
    constant = reports.ratio(lhs, rhs)
    return reports.report(
        "remainder",
        constant,
        constant is None or math.isfinite(constant),
        grid=f.grid,
        seed=seed,
        parameters={"s1": s1, "s2": s2, "p": p, "p1": p1, "p2": p2},
        details={"lhs": lhs, "rhs": rhs},
    )


def product_gate(n, nu1, nu2, p) -> bool:
    dual = n * (1 - 1 / p)
    return nu1 >= 0 and nu2 >= 0 and nu1 + nu2 < n / p + min(n / p, dual)


def product_estimate_check(f, g, nu1, nu2, p=2.0, seed=None):
    n = f.grid.n
    if not product_gate(n, nu1, nu2, p):
        raise errors.InvalidIndexError(
            f"product estimate needs nu1, nu2 >= 0 and nu1+nu2 < n/p + min(n/p, n/p'), got {nu1}, {nu2}, p={p}"
        )
    lhs = besov.besov_norm(spectral.multiply(f, g), besov.BesovIndex(n / p - nu1 - nu2, p, 1))
    rhs = besov.besov_norm(f, besov.BesovIndex(n / p - nu1, p, 1)) * besov.besov_norm(
        g, besov.BesovIndex(n / p - nu2, p, 1)
    )
    constant = reports.ratio(lhs, rhs)
    logger.debug(f"product estimate nu=({nu1}, {nu2}) p={p}: {lhs:.3e} <= C {rhs:.3e}")
    return reports.report(
        "product",
        constant,
        constant is None or math.isfinite(constant),
        grid=f.grid,
        seed=seed,
        parameters={"nu1": nu1, "nu2": nu2, "p": p},
        details={"lhs": lhs, "rhs": rhs},
    )
