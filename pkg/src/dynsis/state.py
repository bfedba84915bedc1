"""Compartment bookkeeping for SIS dynamics on a degree-capped dynamic network.

Nodes are classified by disease status (S or I) and by the exact counts
(s, i) of susceptible and infected neighbours, with s + i bounded by the
per-node carrying capacity M.  This module owns the flat compartment
layout, model parameters, network-level link accounting, and initial
condition construction; the ODE and threshold modules build on it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, UndefinedEquilibriumError

SUSCEPTIBLE = "S"
INFECTED = "I"

#: Denominators smaller than this are treated as exactly zero wherever a
#: rate coefficient would otherwise divide by a vanishing population.
DENOMINATOR_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Disease and network rates plus system size.

    beta   per-link infection rate
    gamma  per-node recovery rate
    alpha  per-free-stub link activation rate
    omega  per-link deletion rate
    M      maximum nodal degree (carrying capacity)
    N      population size
    """

    beta: float
    gamma: float
    alpha: float
    omega: float
    M: int
    N: int

    def __post_init__(self):
        for name in ("beta", "gamma", "alpha", "omega"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.M < 1:
            raise DomainError(f"M must be >= 1, got {self.M}")
        if self.N < 1:
            raise DomainError(f"N must be >= 1, got {self.N}")


class CompartmentIndex:
    """Bijection between (class, s, i) compartments and flat array indices.

    The domain is {(s, i): s >= 0, i >= 0, s + i <= M}, giving
    (M+1)(M+2) compartments in total.  Flat layout: degree class
    k = s + i ascending; within a class all S compartments with s
    descending, then all I compartments with s descending.  This makes
    the threshold module's disease-state ordering a subsequence of the
    full layout.
    """

    def __init__(self, M: int):
        if M < 1:
            raise DomainError(f"M must be >= 1, got {M}")
        self.M = M
        self.size = (M + 1) * (M + 2)

        M1 = M + 1
        sv, iv = np.meshgrid(np.arange(M1), np.arange(M1), indexing="ij")
        self.mask = sv + iv <= M  # valid (s, i) cells
        self._sv = sv
        self._iv = iv

        sgrid = np.full((M1, M1), -1, dtype=np.intp)
        igrid = np.full((M1, M1), -1, dtype=np.intp)
        for s in range(M1):
            for i in range(M1 - s):
                k = s + i
                base = k * (k + 1)
                sgrid[s, i] = base + (k - s)
                igrid[s, i] = base + (k + 1) + (k - s)
        self._sgrid = sgrid
        self._igrid = igrid

        # flat-index -> compartment lookup tables
        self.s_of = np.empty(self.size, dtype=np.intp)
        self.i_of = np.empty(self.size, dtype=np.intp)
        self.is_infected = np.zeros(self.size, dtype=bool)
        self.s_of[sgrid[self.mask]] = sv[self.mask]
        self.i_of[sgrid[self.mask]] = iv[self.mask]
        self.s_of[igrid[self.mask]] = sv[self.mask]
        self.i_of[igrid[self.mask]] = iv[self.mask]
        self.is_infected[igrid[self.mask]] = True
        self.k_of = self.s_of + self.i_of

        # gather/scatter index lists for grid <-> flat conversion
        self._s_take = sgrid[self.mask]
        self._i_take = igrid[self.mask]

    def index_of(self, cls: str, s: int, i: int) -> int:
        """Flat index of compartment (cls, s, i); raises DomainError outside."""
        if cls not in (SUSCEPTIBLE, INFECTED):
            raise DomainError(f"class must be 'S' or 'I', got {cls!r}")
        if s < 0 or i < 0 or s + i > self.M:
            raise DomainError(f"(s={s}, i={i}) outside domain for M={self.M}")
        grid = self._sgrid if cls == SUSCEPTIBLE else self._igrid
        return int(grid[s, i])

    def compartment_of(self, index: int) -> tuple[str, int, int]:
        """Inverse of index_of."""
        if not 0 <= index < self.size:
            raise DomainError(f"index {index} outside [0, {self.size})")
        cls = INFECTED if self.is_infected[index] else SUSCEPTIBLE
        return cls, int(self.s_of[index]), int(self.i_of[index])

    def to_grids(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Unpack a flat vector into (S, I) arrays indexed [s, i]."""
        M1 = self.M + 1
        S = np.zeros((M1, M1))
        I = np.zeros((M1, M1))
        S[self.mask] = values[self._s_take]
        I[self.mask] = values[self._i_take]
        return S, I

    def from_grids(self, S: np.ndarray, I: np.ndarray) -> np.ndarray:
        """Pack (S, I) grids back into a flat vector (inverse of to_grids)."""
        out = np.empty(self.size)
        out[self._s_take] = S[self.mask]
        out[self._i_take] = I[self.mask]
        return out


@dataclass
class StateVector:
    """Expected compartment counts, laid out per a CompartmentIndex.

    Entries are real-valued (mean-field counts, not integers).
    """

    values: np.ndarray
    index: CompartmentIndex

    def total(self) -> float:
        return float(self.values.sum())

    def prevalence(self) -> float:
        return float(self.values[self.index.is_infected].sum())

    def validate(self, N: float) -> None:
        """Check nonnegativity (up to integration tolerance) and node total."""
        if self.values.shape != (self.index.size,):
            raise DomainError(
                f"state length {self.values.shape} != {(self.index.size,)}"
            )
        if self.values.min() < -1e-9 * N:
            raise DomainError(
                f"compartment count below -1e-9*N: min={self.values.min()}"
            )
        if abs(self.total() - N) > 1e-6 * N:
            raise DomainError(f"node total {self.total()} deviates from N={N}")


@dataclass(frozen=True)
class NetworkStats:
    """Link accounting for a state: stubs in use, free stubs, and means."""

    lambda_: float  # total link-stubs in use (twice the edge count)
    phi: float      # total free stubs
    edges: float
    mean_degree: float


def network_stats(state: StateVector, M: int | None = None) -> NetworkStats:
    """Stub totals and mean degree of a compartment state.

    Every node carries M link slots, so lambda_ + phi == N*M exactly.
    """
    idx = state.index
    if M is None:
        M = idx.M
    lam = float(state.values @ idx.k_of)
    n = state.total()
    phi = M * n - lam  # slot accounting: lambda_ + phi == N*M by construction
    mean_degree = lam / n if n > 0 else 0.0
    return NetworkStats(lambda_=lam, phi=phi, edges=lam / 2.0, mean_degree=mean_degree)


def equilibrium_mean_degree(params: ModelParams) -> float:
    """Stationary mean degree alpha*M/(alpha+omega) of the link turnover."""
    if params.alpha + params.omega <= 0:
        raise UndefinedEquilibriumError(
            "mean degree equilibrium undefined for alpha = omega = 0"
        )
    return params.alpha * params.M / (params.alpha + params.omega)


def omega_for_target_degree(alpha: float, M: int, k_star: float) -> float:
    """Deletion rate that makes the stationary mean degree equal k_star."""
    if not 0 < k_star <= M:
        raise DomainError(f"k_star must be in (0, M], got {k_star}")
    if alpha <= 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    return alpha * (M - k_star) / k_star


@dataclass
class DegreeDistribution:
    """Probabilities p_k over degrees k = 0..M."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.ndim != 1 or self.p.size < 2:
            raise DomainError("degree distribution needs entries for k = 0..M, M >= 1")
        if self.p.min() < 0:
            raise DomainError(f"negative probability: min={self.p.min()}")
        if abs(self.p.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {self.p.sum()}, not 1")

    @property
    def M(self) -> int:
        return self.p.size - 1

    def mean(self) -> float:
        return float(self.p @ np.arange(self.p.size))

    def variance(self) -> float:
        k = np.arange(self.p.size)
        m = self.mean()
        return float(self.p @ (k - m) ** 2)

    @classmethod
    def regular(cls, k: int, M: int) -> "DegreeDistribution":
        """Point mass at degree k."""
        if not 0 <= k <= M:
            raise DomainError(f"k={k} outside [0, M={M}]")
        p = np.zeros(M + 1)
        p[k] = 1.0
        return cls(p)

    @classmethod
    def binomial(cls, M: int, q: float) -> "DegreeDistribution":
        """Binomial(M, q) profile; the stationary per-node degree law."""
        if not 0 <= q <= 1:
            raise DomainError(f"q={q} outside [0, 1]")
        return cls(stats.binom.pmf(np.arange(M + 1), M, q))

    @classmethod
    def negative_binomial(cls, mean: float, variance: float, M: int) -> "DegreeDistribution":
        """Negative binomial matched to (mean, variance), conditioned on k <= M.

        Renormalizing the truncated pmf is the law obtained by resampling
        draws above M, so it matches the graph generator.
        """
        r, pr = negative_binomial_shape(mean, variance)
        pmf = stats.nbinom.pmf(np.arange(M + 1), r, pr)
        return cls(pmf / pmf.sum())

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "p_k"])
            for k, pk in enumerate(self.p):
                writer.writerow([k, f"{pk:.17g}"])

    @classmethod
    def load_csv(cls, path) -> "DegreeDistribution":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["k", "p_k"]:
                raise DomainError(f"unexpected degree CSV header: {header}")
            rows = [(int(k), float(pk)) for k, pk in reader]
        rows.sort()
        if [k for k, _ in rows] != list(range(len(rows))):
            raise DomainError("degree CSV must cover k = 0..M without gaps")
        return cls(np.array([pk for _, pk in rows]))


def negative_binomial_shape(mean: float, variance: float) -> tuple[float, float]:
    """Moment-matched (r, p) with mean r(1-p)/p and variance mean/p."""
    if not variance > mean > 0:
        raise DomainError(
            f"negative binomial needs variance > mean > 0, got {mean}, {variance}"
        )
    r = mean * mean / (variance - mean)
    p = mean / variance
    return r, p


def initial_state(dist: DegreeDistribution, rho0: float, N: float,
                  index: CompartmentIndex | None = None) -> StateVector:
    """Compartment counts for a fraction rho0 of infected nodes.

    Nodes get degrees from ``dist``; each node is infected independently
    with probability rho0, and so is each neighbour (binomial mixing),
    which matches uniformly random seeding on a random graph.
    """
    if not 0 <= rho0 <= 1:
        raise DomainError(f"rho0 must be in [0, 1], got {rho0}")
    if index is None:
        index = CompartmentIndex(dist.M)
    elif index.M != dist.M:
        raise DomainError(f"index M={index.M} != distribution M={dist.M}")
    M1 = index.M + 1
    S = np.zeros((M1, M1))
    I = np.zeros((M1, M1))
    for s in range(M1):
        for i in range(M1 - s):
            k = s + i
            w = dist.p[k] * stats.binom.pmf(i, k, rho0)
            S[s, i] = N * (1.0 - rho0) * w
            I[s, i] = N * rho0 * w
    return StateVector(index.from_grids(S, I), index)
