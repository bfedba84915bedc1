"""Epidemic-threshold location in the (beta, omega) plane.

For each transmission rate the critical deletion rate is bracketed and
bisected under one of three epidemic criteria.  Long-run ODE prevalence
is the primary criterion: the local-stability reproduction number can
mispredict long-term outcomes when the network keeps evolving, so the
two methods are allowed to disagree.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig
from .errors import DomainError
from .ngm import dfe_from_distribution, r0
from .ode import integrate
from .simulate import ensemble
from .state import ModelParams, equilibrium_mean_degree, initial_state

OMEGA_TOLERANCE = 1e-3          # bisection width on the deletion rate
ODE_HORIZON = 200.0             # long-run prevalence read-off time
ODE_PREVALENCE_CUTOFF = 1e-3    # epidemic iff I(horizon) > cutoff * N
SIM_HORIZON = 100.0
SIM_OUTBREAK_CUTOFF = 0.01      # a run is an outbreak iff I(horizon) > 1% of N
SIM_VOTE = 0.5                  # epidemic iff more than half the runs break out
FRAGMENTATION_DEGREE = 2.0      # below this stationary mean degree the network fragments

METHODS = ("ode-prevalence", "ngm-r0", "simulation")


@dataclass(frozen=True)
class ThresholdPoint:
    """Critical deletion rate for one transmission rate, or a flagged miss."""

    beta: float
    omega_critical: float | None
    method: str
    flag: str  # "ok" | "fragmented" | "not-bracketed"


def _epidemic_ode(config: RunConfig, params: ModelParams) -> bool:
    state0 = initial_state(config.initial_distribution(), config.rho0, params.N)
    traj = integrate(state0, params, ODE_HORIZON, ODE_HORIZON / 50.0,
                     method=config.integrator)
    return traj.prevalence[-1] > ODE_PREVALENCE_CUTOFF * params.N


def _epidemic_ngm(config: RunConfig, params: ModelParams) -> bool:
    dfe = dfe_from_distribution(config.initial_distribution(), params.N)
    return r0(dfe, params) > 1.0


def _epidemic_sim(config: RunConfig, params: ModelParams, eval_seed: int) -> bool:
    result = ensemble(config.graph_factory(), params, runs=config.sweep.runs,
                      t_max=SIM_HORIZON, sample_dt=SIM_HORIZON,
                      master_seed=eval_seed)
    outbreaks = result.prevalence[:, -1] > SIM_OUTBREAK_CUTOFF * params.N
    return outbreaks.mean() > SIM_VOTE


def find_threshold(config: RunConfig, beta: float, omega_lo: float,
                   omega_hi: float, method: str) -> ThresholdPoint:
    """Bisect the deletion rate at which the epidemic criterion flips.

    The criterion must hold at omega_lo (dense network, epidemic) and
    fail at omega_hi; otherwise the point is flagged and left unsolved.
    """
    if method not in METHODS:
        raise DomainError(f"unknown threshold method {method!r}")
    base = config.params
    eval_counter = 0

    def epidemic(omega: float) -> bool:
        nonlocal eval_counter
        eval_counter += 1
        params = replace(base, beta=beta, omega=omega)
        if method == "ode-prevalence":
            return _epidemic_ode(config, params)
        if method == "ngm-r0":
            return _epidemic_ngm(config, params)
        # derive a fresh substream per evaluation so runs never repeat
        seed = np.random.SeedSequence(
            [config.master_seed, int(beta * 10**9), eval_counter]
        ).generate_state(1)[0]
        return _epidemic_sim(config, params, int(seed))

    if not epidemic(omega_lo) or epidemic(omega_hi):
        return ThresholdPoint(beta, None, method, "not-bracketed")

    lo, hi = omega_lo, omega_hi
    while hi - lo > OMEGA_TOLERANCE:
        mid = 0.5 * (lo + hi)
        if epidemic(mid):
            lo = mid
        else:
            hi = mid
    omega_c = 0.5 * (lo + hi)

    k_star = equilibrium_mean_degree(replace(base, beta=beta, omega=omega_c))
    flag = "fragmented" if k_star < FRAGMENTATION_DEGREE else "ok"
    return ThresholdPoint(beta, omega_c, method, flag)


def threshold_sweep(config: RunConfig) -> list[ThresholdPoint]:
    """Locate the critical deletion rate for every grid transmission rate."""
    if config.sweep is None:
        raise DomainError("config has no [sweep] section")
    spec = config.sweep
    points = [
        find_threshold(config, beta, spec.omega_min, spec.omega_max, spec.method)
        for beta in spec.beta_grid
    ]
    points.sort(key=lambda p: (p.beta, p.method))
    return points


def save_threshold_csv(path, points: list[ThresholdPoint]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta", "omega_critical", "method", "flag"])
        for p in points:
            omega = "" if p.omega_critical is None else f"{p.omega_critical:.17g}"
            writer.writerow([f"{p.beta:.17g}", omega, p.method, p.flag])


def read_threshold_csv(path) -> list[ThresholdPoint]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["beta", "omega_critical", "method", "flag"]:
            raise DomainError(f"unexpected threshold header: {header}")
        return [
            ThresholdPoint(
                beta=float(row[0]),
                omega_critical=float(row[1]) if row[1] else None,
                method=row[2],
                flag=row[3],
            )
            for row in reader
        ]
