"""Invasion threshold analysis at the disease-free state.

Linearizing the compartment system about a disease-free network profile
splits the Jacobian into new-infection terms F (a sum of two rank-one
outer products: transmission across existing links, and attachment of a
new link to an infected node) and transition terms V (recovery, neighbour
recovery, within-class infection, and the link turnover that couples
adjacent degree classes).  The basic reproduction number is the spectral
radius of F V^-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import DomainError, NumericalError
from .ode import rhs
from .state import (
    INFECTED,
    SUSCEPTIBLE,
    CompartmentIndex,
    DegreeDistribution,
    ModelParams,
    equilibrium_mean_degree,
)

POWER_ITERATION_RTOL = 1e-10
POWER_ITERATION_MAX_STEPS = 100_000


class DiseaseStateIndex:
    """Flat ordering of the disease states used by the linearization.

    Disease states are every I_{s,i} plus every S_{s,i} with i >= 1.
    Ordering: degree class k ascending; within a class the S states with
    s descending (S_{k-1,1} .. S_{0,k}), then the I states with s
    descending (I_{k,0} .. I_{0,k}).  Class k holds 2k+1 states, so the
    total is (M+1)^2.
    """

    def __init__(self, M: int):
        if M < 1:
            raise DomainError(f"M must be >= 1, got {M}")
        self.M = M
        self.size = (M + 1) ** 2
        classes = []
        infected = []
        s_of = []
        i_of = []
        for k in range(M + 1):
            for s in range(k - 1, -1, -1):
                classes.append(k)
                infected.append(False)
                s_of.append(s)
                i_of.append(k - s)
            for s in range(k, -1, -1):
                classes.append(k)
                infected.append(True)
                s_of.append(s)
                i_of.append(k - s)
        self.k_of = np.array(classes, dtype=np.intp)
        self.is_infected = np.array(infected, dtype=bool)
        self.s_of = np.array(s_of, dtype=np.intp)
        self.i_of = np.array(i_of, dtype=np.intp)

    def index_of(self, cls: str, s: int, i: int) -> int:
        k = s + i
        if s < 0 or i < 0 or k > self.M:
            raise DomainError(f"(s={s}, i={i}) outside domain for M={self.M}")
        if cls == SUSCEPTIBLE:
            if i < 1:
                raise DomainError(f"S_({s},{i}) is not a disease state")
            return k * k + (k - 1 - s)
        if cls == INFECTED:
            return k * k + k + (k - s)
        raise DomainError(f"class must be 'S' or 'I', got {cls!r}")

    def full_indices(self, index: CompartmentIndex) -> np.ndarray:
        """Positions of the disease states inside the full compartment layout."""
        out = np.empty(self.size, dtype=np.intp)
        for j in range(self.size):
            cls = INFECTED if self.is_infected[j] else SUSCEPTIBLE
            out[j] = index.index_of(cls, int(self.s_of[j]), int(self.i_of[j]))
        return out


@dataclass
class DfeState:
    """Disease-free populations S_{k,0} for k = 0..M."""

    s_k0: np.ndarray

    def __post_init__(self):
        self.s_k0 = np.asarray(self.s_k0, dtype=float)
        if self.s_k0.min() < 0:
            raise DomainError("disease-free populations must be >= 0")

    @property
    def M(self) -> int:
        return self.s_k0.size - 1

    @property
    def n_total(self) -> float:
        return float(self.s_k0.sum())

    @property
    def stub_total(self) -> float:
        return float(self.s_k0 @ np.arange(self.s_k0.size))

    @property
    def free_stub_total(self) -> float:
        return float(self.s_k0 @ (self.M - np.arange(self.s_k0.size)))


def dfe_from_distribution(dist: DegreeDistribution, N: float) -> DfeState:
    """Disease-free profile with N*p_k nodes in each degree class."""
    return DfeState(N * dist.p)


@dataclass
class NgmMatrices:
    """New-infection matrix F and transition matrix V over disease states."""

    F: np.ndarray
    V: np.ndarray
    index: DiseaseStateIndex


def assemble_F(dfe: DfeState, params: ModelParams) -> np.ndarray:
    """New-infection matrix: both routes are rank-one outer products.

    Transmission across an existing link moves S_{k,0} nodes to
    S_{k-1,1}; attachment of a fresh link to an infected node moves
    S_{k-1,0} nodes to S_{k-1,1}.  Rows are therefore supported on the
    S_{k-1,1} states only.
    """
    M = params.M
    if dfe.M != M:
        raise DomainError(f"DFE M={dfe.M} != params M={M}")
    ds = DiseaseStateIndex(M)
    n = dfe.s_k0

    u_s = np.zeros(ds.size)
    v_s = np.zeros(ds.size)
    u_d = np.zeros(ds.size)
    v_d = np.zeros(ds.size)
    for k in range(1, M + 1):
        row = ds.index_of(SUSCEPTIBLE, k - 1, 1)
        u_s[row] = k * n[k]
        u_d[row] = (M - (k - 1)) * n[k - 1]
    sus = ~ds.is_infected
    v_s[sus] = ds.s_of[sus] * ds.i_of[sus]
    v_d[ds.is_infected] = M - ds.k_of[ds.is_infected]

    F = np.zeros((ds.size, ds.size))
    # denominators vanish only when the corresponding route has no flux
    # (linkless / fully saturated disease-free network)
    if params.beta > 0 and dfe.stub_total > 0:
        F += (params.beta / dfe.stub_total) * np.outer(u_s, v_s)
    if params.alpha > 0 and dfe.free_stub_total > 0:
        F += (params.alpha / dfe.free_stub_total) * np.outer(u_d, v_d)
    return F


def assemble_V(dfe: DfeState, params: ModelParams) -> np.ndarray:
    """Linearized transitions among disease states (outflow-positive sign).

    Column j collects what leaves disease state j (diagonal) and where it
    lands inside the set (negative off-diagonals): node recovery,
    neighbour recovery, within-class infection shifts, per-link deletion
    splitting by neighbour type, and link creation, which at linear order
    always attaches to a susceptible partner.  Flows into non-disease
    states appear only through the diagonal.

    The infection shift of an infected node's susceptible neighbours uses
    the invasion limit of its rate coefficient: near the disease-free
    state every susceptible neighbour of an infected node has exactly one
    infected neighbour, so each is infected at rate beta and the node
    moves (s, i) -> (s-1, i+1) at rate beta*s.  This limit is invisible
    to coordinate-wise differentiation of the mean-field right-hand side
    (the coefficient is a 0/0 ratio of disjoint coordinate groups), so
    F - V deviates from ``jacobian_oracle`` by exactly these shifts; the
    threshold anchors require them.
    """
    M = params.M
    if dfe.M != M:
        raise DomainError(f"DFE M={dfe.M} != params M={M}")
    beta, gamma, alpha, omega = params.beta, params.gamma, params.alpha, params.omega
    ds = DiseaseStateIndex(M)
    V = np.zeros((ds.size, ds.size))

    for j in range(ds.size):
        s, i, k = int(ds.s_of[j]), int(ds.i_of[j]), int(ds.k_of[j])
        if ds.is_infected[j]:
            V[j, j] += gamma * (1 + i) + beta * s + omega * k + alpha * (M - k)
            if s >= 1:
                V[ds.index_of(INFECTED, s - 1, i + 1), j] -= beta * s   # infects a neighbour
                V[ds.index_of(INFECTED, s - 1, i), j] -= omega * s      # drop susceptible link
            if i >= 1:
                V[ds.index_of(SUSCEPTIBLE, s, i), j] -= gamma          # node recovers
                V[ds.index_of(INFECTED, s + 1, i - 1), j] -= gamma * i  # neighbour recovers
                V[ds.index_of(INFECTED, s, i - 1), j] -= omega * i      # drop infected link
            if k < M:
                V[ds.index_of(INFECTED, s + 1, i), j] -= alpha * (M - k)  # gain susceptible link
        else:
            V[j, j] += (beta + gamma + omega) * i + omega * s + alpha * (M - k)
            V[ds.index_of(INFECTED, s, i), j] -= beta * i               # node gets infected
            if i >= 2:
                V[ds.index_of(SUSCEPTIBLE, s + 1, i - 1), j] -= gamma * i
                V[ds.index_of(SUSCEPTIBLE, s, i - 1), j] -= omega * i
            if s >= 1:
                V[ds.index_of(SUSCEPTIBLE, s - 1, i), j] -= omega * s
            if k < M:
                V[ds.index_of(SUSCEPTIBLE, s + 1, i), j] -= alpha * (M - k)
    return V


def build_ngm(dfe: DfeState, params: ModelParams) -> NgmMatrices:
    return NgmMatrices(F=assemble_F(dfe, params), V=assemble_V(dfe, params),
                       index=DiseaseStateIndex(params.M))


def r0(dfe: DfeState, params: ModelParams) -> float:
    """Spectral radius of F V^-1 by power iteration on a factorized V."""
    F = assemble_F(dfe, params)
    V = assemble_V(dfe, params)
    try:
        lu = lu_factor(V)
    except Exception as exc:  # singular V: no well-defined threshold
        raise NumericalError(f"transition matrix not invertible: {exc}") from exc
    if not np.all(np.isfinite(lu[0])):
        raise NumericalError("transition matrix factorization produced non-finite values")

    x = np.ones(F.shape[0])
    x = F @ lu_solve(lu, x)
    norm = x.sum()  # L1 norm: F V^-1 is entrywise nonnegative
    if norm <= 0:
        return 0.0
    x /= norm
    estimate = norm
    for _ in range(POWER_ITERATION_MAX_STEPS):
        x = F @ lu_solve(lu, x)
        norm = x.sum()
        if not np.isfinite(norm):
            raise NumericalError("power iteration diverged (non-finite iterate)")
        if norm <= 0:
            return 0.0
        x /= norm
        if abs(norm - estimate) < POWER_ITERATION_RTOL * abs(norm):
            return float(norm)
        estimate = norm
    raise NumericalError(
        f"power iteration did not converge in {POWER_ITERATION_MAX_STEPS} steps; "
        f"last estimates {estimate}, {norm}"
    )


def _static_class_block(k: int, beta: float, gamma: float) -> np.ndarray:
    """Transition block for one fixed degree class k (no link turnover)."""
    size = 2 * k + 1
    Vk = np.zeros((size, size))
    # class-local ordering mirrors DiseaseStateIndex: S_{k-1,1}.. then I_{k,0}..
    s_pos = {s: (k - 1 - s) for s in range(k)}
    i_pos = {s: k + (k - s) for s in range(k + 1)}
    for s in range(k):  # S_{s,i}, i = k - s >= 1
        i = k - s
        j = s_pos[s]
        Vk[j, j] += (beta + gamma) * i
        Vk[i_pos[s], j] -= beta * i
        if i >= 2:
            Vk[s_pos[s + 1], j] -= gamma * i
    for s in range(k + 1):  # I_{s,i}
        i = k - s
        j = i_pos[s]
        Vk[j, j] += gamma * (1 + i) + beta * s
        if s >= 1:
            Vk[i_pos[s - 1], j] -= beta * s  # infects a susceptible neighbour
        if i >= 1:
            Vk[s_pos[s], j] -= gamma
            Vk[i_pos[s + 1], j] -= gamma * i
    return Vk


def static_r0(dist: DegreeDistribution, beta: float, gamma: float, N: float,
              M: int | None = None) -> float:
    """Closed-form reproduction number for a frozen network.

    Evaluates beta / (sum_k k S_k0) * sum_k v_k^T V_k^-1 u_k with one
    linear solve per degree class; the degree classes decouple because
    nodes never change class without link turnover.
    """
    if M is None:
        M = dist.M
    elif M != dist.M:
        raise DomainError(f"M={M} != distribution M={dist.M}")
    s_k0 = N * dist.p
    stub_total = float(s_k0 @ np.arange(M + 1))
    if stub_total <= 0:
        raise DomainError("static threshold undefined without links at the DFE")
    total = 0.0
    for k in range(1, M + 1):
        if s_k0[k] == 0.0:
            continue
        u_k = np.zeros(2 * k + 1)
        u_k[0] = k * s_k0[k]
        v_k = np.zeros(2 * k + 1)
        for s in range(1, k):
            v_k[k - 1 - s] = s * (k - s)
        Vk = _static_class_block(k, beta, gamma)
        try:
            x = np.linalg.solve(Vk, u_k)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"class-{k} transition block singular: {exc}") from exc
        total += float(v_k @ x)
    return beta / stub_total * total


def meanfield_r0(params: ModelParams) -> float:
    """Homogeneous random-mixing value beta * <k>* / gamma."""
    if params.gamma <= 0:
        return float("nan")
    return params.beta * equilibrium_mean_degree(params) / params.gamma


def jacobian_oracle(dfe: DfeState, params: ModelParams,
                    step_scale: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the full RHS restricted to disease states.

    Independent check on the assembled matrices: it only evaluates the
    nonlinear right-hand side, never F or V.  Coordinate-wise differences
    cannot see the invasion-limit infection shifts of the I states (see
    assemble_V), so F - V matches this oracle up to exactly those terms.
    """
    M = params.M
    index = CompartmentIndex(M)
    ds = DiseaseStateIndex(M)
    cols = ds.full_indices(index)

    base = np.zeros(index.size)
    for k in range(M + 1):
        base[index.index_of(SUSCEPTIBLE, k, 0)] = dfe.s_k0[k]
    h = step_scale * max(dfe.n_total, 1.0)

    J = np.empty((ds.size, ds.size))
    for j, col in enumerate(cols):
        up = base.copy()
        up[col] += h
        down = base.copy()
        down[col] -= h
        diff = (rhs(up, params, index) - rhs(down, params, index)) / (2 * h)
        J[:, j] = diff[cols]
    return J
