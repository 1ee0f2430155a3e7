import csv
import dataclasses
import logging
import math
from pathlib import Path
from typing import List, Optional

import numpy as np

from spectral_ins import constants
from spectral_ins import errors
from spectral_ins import spectral

logger = logging.getLogger(__name__)


def _check_exponent(name, value):
    if not (value >= 1 or math.isinf(value)) or math.isnan(value):
        raise errors.InvalidIndexError(f"{name}={value} outside [1, inf]")


@dataclasses.dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float
    r: float

    def __post_init__(self):
        _check_exponent("p", self.p)
        _check_exponent("r", self.r)

    def banach_gate(self, n: int) -> bool:
        critical = n / self.p
        return self.s < critical - 1e-14 or (
            abs(self.s - critical) <= 1e-14 and self.r == 1
        )

    def with_s(self, s) -> "BesovIndex":
        return BesovIndex(s, self.p, self.r)

    def dual(self) -> "BesovIndex":
        return BesovIndex(-self.s, conjugate(self.p), conjugate(self.r))

    @classmethod
    def velocity(cls, n, p):
        return cls(n / p - 1, p, 1)

    @classmethod
    def density(cls, n, p):
        return cls(n / p, p, 1)

    @classmethod
    def low_pressure(cls, n, p):
        return cls(n / p - n / 2, p, 2)

    def to_dict(self):
        return {"s": self.s, "p": self.p, "r": self.r}

    def __str__(self):
        return f"B^{self.s:g}_{self.p:g},{self.r:g}"


def conjugate(p):
    if math.isinf(p):
        return 1.0
    if p == 1:
        return math.inf
    return p / (p - 1)


def lr_sum(values, r) -> float:
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        return 0.0
    if math.isinf(r):
        return float(np.max(values))
    return float(np.sum(values ** r) ** (1.0 / r))


def block_norms(u: spectral.SpectralField, p: float):
    return {j: spectral.lp_norm(block, p) for j, block in spectral.dyadic_blocks(u).items()}


def weighted_blocks(u, idx: BesovIndex):
    return {j: 2.0 ** (j * idx.s) * value for j, value in block_norms(u, idx.p).items()}


def besov_norm(u: spectral.SpectralField, idx: BesovIndex) -> float:
    """Homogeneous Besov norm over the finite dyadic range; the k=0 mode is ignored."""
    if not idx.banach_gate(u.grid.n):
        logger.debug(f"{idx} is outside the Banach gate for n={u.grid.n}")
    return lr_sum(weighted_blocks(u, idx).values(), idx.r)


def flagged_norm(u, idx: BesovIndex):
    return {"value": besov_norm(u, idx), "banach_gate": idx.banach_gate(u.grid.n)}


def tail_norm(u, idx: BesovIndex, m: int) -> float:
    """||(Id - S_m) u|| as the tail sum over shells j >= m."""
    weighted = weighted_blocks(u, idx)
    return lr_sum([v for j, v in weighted.items() if j >= m], idx.r)


def intersection_norm(u, first: BesovIndex, second: BesovIndex) -> float:
    return max(besov_norm(u, first), besov_norm(u, second))


def equivalence_sequence(u, idx: BesovIndex):
    """c_j = 2^{js} ||D_j u|| / ||u||, reported rather than assumed normalised."""
    total = besov_norm(u, idx)
    if total == 0.0:
        return {}
    return {j: value / total for j, value in weighted_blocks(u, idx).items()}


def low_freq_characterization(u: spectral.SpectralField, idx: BesovIndex) -> float:
    if not idx.s < 0:
        raise errors.InvalidIndexError(f"low-frequency characterization needs s < 0, got {idx.s}")
    partition = spectral.build_partition(u.grid)
    u = u.without_mean()
    terms = []
    top = partition.j_max + 1
    for j in range(partition.j_min, top + 1):
        terms.append(2.0 ** (j * idx.s) * spectral.lp_norm(spectral.low_cutoff(u, j), idx.p))
    full = spectral.lp_norm(spectral.band_limit(u), idx.p)
    if full > 0:
        # every cutoff above the band returns the whole field: a geometric tail
        ratio = 2.0 ** idx.s
        first = 2.0 ** ((top + 1) * idx.s) * full
        if math.isinf(idx.r):
            terms.append(first)
        else:
            terms.append(first * (1.0 / (1.0 - ratio ** idx.r)) ** (1.0 / idx.r))
    return lr_sum(terms, idx.r)


def low_freq_equivalence(u, idx: BesovIndex):
    value = low_freq_characterization(u, idx)
    norm = besov_norm(u, idx)
    return {
        "value": value,
        "besov_norm": norm,
        "ratio": value / norm if norm > 0 else None,
    }


def interpolation_check(u, s1, s2, theta, p, r):
    if not s1 < s2:
        raise errors.InvalidIndexError(f"interpolation needs s1 < s2, got {s1}, {s2}")
    if not 0 < theta < 1:
        raise errors.InvalidIndexError(f"interpolation needs theta in (0, 1), got {theta}")
    lhs = besov_norm(u, BesovIndex(theta * s1 + (1 - theta) * s2, p, r))
    rhs = besov_norm(u, BesovIndex(s1, p, r)) ** theta * besov_norm(
        u, BesovIndex(s2, p, r)
    ) ** (1 - theta)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "slack": rhs - lhs,
        "passed": lhs <= rhs * (1 + 1e-10),
    }


def duality_pair(u, v, idx: BesovIndex):
    """sum_j <D_j u, (D_{j-1} + D_j + D_{j+1}) v> and its size against the dual norms."""
    u._check(v)
    partition = spectral.build_partition(u.grid)
    pair = 0.0
    for index, j in enumerate(partition.indices):
        left = u.with_fourier(u.fourier * partition.phi_masks[index])
        right = spectral.neighbour_block(v, j)
        pair += spectral.inner(left, right)
    denominator = besov_norm(u, idx) * besov_norm(v, idx.dual())
    return {
        "pair": pair,
        "ratio": abs(pair) / denominator if denominator > 0 else None,
    }


def embedding_check(u, s, p1, p2, r):
    if p1 > p2:
        raise errors.InvalidIndexError(f"embedding needs p1 <= p2, got {p1} > {p2}")
    n = u.grid.n
    low = besov_norm(u, BesovIndex(s, p1, r))
    high = besov_norm(u, BesovIndex(s - n * (1 / p1 - 1 / p2), p2, r))
    return {"lhs": high, "rhs": low, "constant": high / low if low > 0 else None}


def monotonicity_check(u, s, p, r1, r2):
    if r1 > r2:
        r1, r2 = r2, r1
    small = besov_norm(u, BesovIndex(s, p, r1))
    large = besov_norm(u, BesovIndex(s, p, r2))
    return {"r1_norm": small, "r2_norm": large, "passed": large <= small * (1 + 1e-12)}


def dilate(u: spectral.SpectralField, l: float) -> spectral.SpectralField:
    """u(l x), realised exactly by reading the samples on a box of side L/l."""
    return spectral.SpectralField(u.grid.dilated(l), u.fourier, u.mean_excluded)


def scaling_check(u, idx: BesovIndex, l=2.0):
    base = besov_norm(u, idx)
    dilated = besov_norm(dilate(u, l), idx)
    expected = l ** (idx.s - u.grid.n / idx.p)
    ratio = dilated / base if base > 0 else None
    return {
        "ratio": ratio,
        "expected": expected,
        "relative_error": abs(ratio / expected - 1) if ratio is not None else 0.0,
    }


def critical_scaling_check(rho, u, p, l=2.0):
    """Both rho(l.) and l u(l.) keep their critical norms."""
    n = u.grid.n
    velocity_index = BesovIndex.velocity(n, p)
    density_index = BesovIndex.density(n, p)
    velocity_before = besov_norm(u, velocity_index)
    velocity_after = besov_norm(dilate(u, l) * l, velocity_index)
    density_before = besov_norm(rho, density_index)
    density_after = besov_norm(dilate(rho, l), density_index)
    return {
        "velocity_ratio": velocity_after / velocity_before if velocity_before > 0 else None,
        "density_ratio": density_after / density_before if density_before > 0 else None,
    }


@dataclasses.dataclass
class NormTrace:
    """Per-time norm samples aggregated in L^q over [0, T] by left-endpoint quadrature."""

    name: str
    time_exponent: float
    index: Optional[BesovIndex] = None
    times: List[float] = dataclasses.field(default_factory=list)
    values: List[float] = dataclasses.field(default_factory=list)

    def __post_init__(self):
        for value in self.values:
            self._check_value(value)
        for before, after in zip(self.times, self.times[1:]):
            if not after > before:
                raise errors.InvalidInputError(f"trace {self.name}: times must increase")
        if len(self.times) != len(self.values):
            raise errors.InvalidInputError(f"trace {self.name}: times and values differ in length")

    def _check_value(self, value):
        if value < 0 or math.isnan(value):
            raise errors.InvalidInputError(f"trace {self.name}: negative value {value}")

    def append(self, t, value):
        self._check_value(value)
        if self.times and not t > self.times[-1]:
            raise errors.InvalidInputError(f"trace {self.name}: time {t} not after {self.times[-1]}")
        self.times.append(float(t))
        self.values.append(float(value))

    def running(self) -> List[float]:
        q = self.time_exponent
        if math.isinf(q):
            return list(np.maximum.accumulate(self.values)) if self.values else []
        result = [0.0]
        total = 0.0
        for k in range(1, len(self.times)):
            total += (self.times[k] - self.times[k - 1]) * self.values[k - 1] ** q
            result.append(total ** (1.0 / q))
        return result[: len(self.times)]

    def aggregate(self) -> float:
        running = self.running()
        return float(running[-1]) if running else 0.0


def sup_trace(name, index=None):
    return NormTrace(name, math.inf, index)


def integral_trace(name, index=None, q=1.0):
    return NormTrace(name, q, index)


def write_traces_csv(path, traces: List[NormTrace]):
    times = sorted({t for trace in traces for t in trace.times})
    lookup = [dict(zip(trace.times, trace.values)) for trace in traces]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t"] + [trace.name for trace in traces])
        for t in times:
            row = [format(t, constants.CSV_FLOAT_FORMAT)]
            for values in lookup:
                value = values.get(t)
                row.append("" if value is None else format(value, constants.CSV_FLOAT_FORMAT))
            writer.writerow(row)
    logger.info(f"wrote {len(traces)} traces to {path}")


def read_traces_csv(path):
    with open(path, "r", newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    traces = {name: ([], []) for name in header[1:]}
    for row in body:
        t = float(row[0])
        for name, cell in zip(header[1:], row[1:]):
            if cell:
                traces[name][0].append(t)
                traces[name][1].append(float(cell))
    return traces
