"""Mean-field ODE system for SIS spread on a degree-capped dynamic network.

The right-hand side tracks every (class, s, i) compartment: infection and
recovery of the node itself, neighbour infection/recovery shifts, and the
link deletion/creation shifts that move nodes between degree classes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError
from .state import (
    DENOMINATOR_FLOOR,
    CompartmentIndex,
    ModelParams,
    StateVector,
)


@dataclass(frozen=True)
class MixingCoefficients:
    """Population-averaged rate coefficients entering the neighbour fluxes.

    g_s  infection rate per susceptible neighbour of an S node
    g_i  infection rate per susceptible neighbour of an I node
    p_s  probability a newly created link attaches to a susceptible node
    p_i  probability it attaches to an infected node
    """

    g_s: float
    g_i: float
    p_s: float
    p_i: float


def _ratio(num: float, den: float) -> float:
    # Vanishing denominators mean the flux the coefficient multiplies is
    # itself zero; returning 0 keeps the field well defined.
    if den < DENOMINATOR_FLOOR:
        return 0.0
    return num / den


def _mixing_from_grids(S, I, sv, iv, M, beta):
    g_s = beta * _ratio(float((sv * iv * S).sum()), float((sv * S).sum()))
    g_i = beta * _ratio(float((iv * iv * S).sum()), float((sv * I).sum()))
    free = M - sv - iv
    phi_s = float((free * S).sum())
    phi_i = float((free * I).sum())
    p_s = _ratio(phi_s, phi_s + phi_i)
    p_i = _ratio(phi_i, phi_s + phi_i)
    return g_s, g_i, p_s, p_i


def compute_mixing(state: StateVector, params: ModelParams) -> MixingCoefficients:
    """Evaluate the four mixing coefficients at a compartment state."""
    idx = state.index
    S, I = idx.to_grids(state.values)
    g_s, g_i, p_s, p_i = _mixing_from_grids(S, I, idx._sv, idx._iv, idx.M, params.beta)
    return MixingCoefficients(g_s, g_i, p_s, p_i)


def _shift(a: np.ndarray, ds: int, di: int) -> np.ndarray:
    """out[s, i] = a[s + ds, i + di], zero-padded at the array boundary."""
    n = a.shape[0]
    out = np.zeros_like(a)
    s_dst = slice(max(0, -ds), n - max(0, ds))
    s_src = slice(max(0, ds), n - max(0, -ds))
    i_dst = slice(max(0, -di), n - max(0, di))
    i_src = slice(max(0, di), n - max(0, -di))
    out[s_dst, i_dst] = a[s_src, i_src]
    return out


def rhs(state, params: ModelParams, index: CompartmentIndex | None = None) -> np.ndarray:
    """Time derivative of every compartment count.

    Accepts a StateVector or a bare flat array (with ``index`` supplied).
    Boundary compartments receive no flux from outside the (s, i) domain,
    and the derivative sums to zero: nodes are conserved.
    """
    if isinstance(state, StateVector):
        index = state.index
        values = state.values
    else:
        if index is None:
            raise DomainError("bare array input requires an explicit index")
        values = np.asarray(state, dtype=float)

    M = index.M
    sv, iv = index._sv, index._iv
    S, I = index.to_grids(values)
    g_s, g_i, p_s, p_i = _mixing_from_grids(S, I, sv, iv, M, params.beta)

    beta, gamma, alpha, omega = params.beta, params.gamma, params.alpha, params.omega
    k = sv + iv
    free_S = (M - k) * S
    free_I = (M - k) * I

    infect = beta * iv * S  # node infection flux S_si -> I_si

    dS = (
        -infect
        + gamma * I
        + gamma * (_shift(iv * S, -1, +1) - iv * S)
        + g_s * (_shift(sv * S, +1, -1) - sv * S)
        - omega * (k * S - _shift(iv * S, 0, +1) - _shift(sv * S, +1, 0))
        - alpha * free_S
        + alpha * p_s * _shift(free_S, -1, 0)
        + alpha * p_i * _shift(free_S, 0, -1)
    )
    dI = (
        infect
        - gamma * I
        + gamma * (_shift(iv * I, -1, +1) - iv * I)
        + g_i * (_shift(sv * I, +1, -1) - sv * I)
        - omega * (k * I - _shift(iv * I, 0, +1) - _shift(sv * I, +1, 0))
        - alpha * free_I
        + alpha * p_s * _shift(free_I, -1, 0)
        + alpha * p_i * _shift(free_I, 0, -1)
    )
    return index.from_grids(dS, dI)


@dataclass
class Trajectory:
    """Time-gridded compartment states with derived network/disease series."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), index.size)
    index: CompartmentIndex
    n_nodes: float

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0) and self.times.size > 1:
            raise DomainError("sample times must be strictly increasing")

    @property
    def prevalence(self) -> np.ndarray:
        return self.states[:, self.index.is_infected].sum(axis=1)

    @property
    def susceptible(self) -> np.ndarray:
        return self.states[:, ~self.index.is_infected].sum(axis=1)

    @property
    def stubs(self) -> np.ndarray:
        return self.states @ self.index.k_of

    @property
    def mean_degree(self) -> np.ndarray:
        return self.stubs / self.n_nodes

    @property
    def edges(self) -> np.ndarray:
        return self.stubs / 2.0

    @property
    def phi(self) -> np.ndarray:
        return self.states @ (self.index.M - self.index.k_of)

    def state_at(self, j: int) -> StateVector:
        return StateVector(self.states[j].copy(), self.index)

    def save_csv(self, path) -> None:
        """Write `t,S,I,mean_degree,edges,phi` rows at full precision."""
        cols = (self.times, self.susceptible, self.prevalence,
                self.mean_degree, self.edges, self.phi)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "S", "I", "mean_degree", "edges", "phi"])
            for row in zip(*cols):
                writer.writerow([f"{x:.17g}" for x in row])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Parse a trajectory CSV back into named columns."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["t", "S", "I", "mean_degree", "edges", "phi"]
        if header != expected:
            raise DomainError(f"unexpected trajectory header: {header}")
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows) if rows else np.empty((0, len(expected)))
    return {name: data[:, j] for j, name in enumerate(expected)}


def sample_grid(t_end: float, sample_dt: float) -> np.ndarray:
    """Uniform grid 0, dt, 2dt, ... covering [0, t_end] (t_end appended if off-grid)."""
    if t_end < 0 or sample_dt <= 0:
        raise DomainError("need t_end >= 0 and sample_dt > 0")
    n = int(np.floor(t_end / sample_dt + 1e-9))
    times = np.arange(n + 1) * sample_dt
    if times[-1] < t_end - 1e-9 * sample_dt:
        times = np.append(times, t_end)
    return times


def integrate(state0: StateVector, params: ModelParams, t_end: float,
              sample_dt: float, method: str = "adaptive",
              rk4_dt: float = 0.01, rtol: float = 1e-6,
              atol_scale: float = 1e-8) -> Trajectory:
    """Integrate the compartment system and sample it on a uniform grid.

    ``method="adaptive"`` uses an embedded 4(5) Runge-Kutta pair with
    interpolated output; ``method="rk4"`` is a fixed-step classic RK4
    fallback for bitwise-reproducible runs.
    """
    if t_end <= 0:
        raise DomainError(f"t_end must be > 0, got {t_end}")
    index = state0.index
    n_total = state0.total()
    times = sample_grid(t_end, sample_dt)

    def f(t, y):
        return rhs(y, params, index)

    if method == "adaptive":
        sol = solve_ivp(f, (0.0, t_end), state0.values, method="RK45",
                        t_eval=times, rtol=rtol, atol=atol_scale * n_total)
        if not sol.success:
            reached = float(sol.t[-1]) if sol.t.size else 0.0
            raise IntegrationError(
                f"adaptive integration failed at t={reached}: {sol.message}",
                time=reached,
            )
        states = sol.y.T.copy()
    elif method == "rk4":
        states = np.empty((times.size, index.size))
        y = state0.values.astype(float).copy()
        states[0] = y
        for j in range(1, times.size):
            span = times[j] - times[j - 1]
            steps = max(1, int(np.ceil(span / rk4_dt - 1e-12)))
            h = span / steps
            t = times[j - 1]
            for _ in range(steps):
                k1 = f(t, y)
                k2 = f(t + h / 2, y + h / 2 * k1)
                k3 = f(t + h / 2, y + h / 2 * k2)
                k4 = f(t + h, y + h * k3)
                y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
            states[j] = y
    else:
        raise DomainError(f"unknown integration method {method!r}")

    return Trajectory(times=times, states=states, index=index, n_nodes=n_total)
