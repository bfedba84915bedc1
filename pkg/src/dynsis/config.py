"""Declarative run configuration: TOML files with flag overrides.

Every recipe (figure reproduction, sweep) is a committed config file with
all seeds explicit, so outputs are reproducible byte for byte.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, DomainError
from .netgen import negative_binomial_degrees, configuration_model, regular_random, seed_infection
from .simulate import Graph
from .state import DegreeDistribution, ModelParams


@dataclass(frozen=True)
class NetworkSpec:
    """Initial-network recipe: generator type plus its parameters."""

    type: str                 # "regular" | "negative-binomial"
    seed: int
    k: int | None = None      # regular
    mean: float | None = None       # negative binomial
    variance: float | None = None

    def degree_distribution(self, M: int) -> DegreeDistribution:
        if self.type == "regular":
            return DegreeDistribution.regular(self.k, M)
        return DegreeDistribution.negative_binomial(self.mean, self.variance, M)

    def build_graph(self, N: int, M: int, rng) -> Graph:
        if self.type == "regular":
            return regular_random(N, self.k, M, seed=rng)
        degrees = negative_binomial_degrees(N, self.mean, self.variance, M, seed=rng)
        return configuration_model(degrees, M, seed=rng)


@dataclass(frozen=True)
class SweepSpec:
    beta_grid: tuple[float, ...]
    omega_min: float
    omega_max: float
    method: str = "ode-prevalence"
    runs: int = 50


@dataclass
class RunConfig:
    """Everything one subcommand invocation needs."""

    params: ModelParams
    network: NetworkSpec
    i0: int
    t_max: float
    sample_dt: float
    runs: int
    master_seed: int
    integrator: str = "adaptive"
    out: str | None = None
    sweep: SweepSpec | None = None

    @property
    def rho0(self) -> float:
        return self.i0 / self.params.N

    def initial_distribution(self) -> DegreeDistribution:
        return self.network.degree_distribution(self.params.M)

    def graph_factory(self):
        """Per-run (graph, infected set) builder drawing from the run's stream."""
        N, M, i0 = self.params.N, self.params.M, self.i0

        def factory(rng: np.random.Generator):
            graph = self.network.build_graph(N, M, rng)
            infected = sorted(seed_infection(N, i0, seed=rng))
            return graph, infected

        return factory


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ConfigError(f"missing key '{key}' in [{section}]")
    return table[key]


def _reject_unknown(table: dict, allowed: set[str], section: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{section}]")


def load_config(path) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {path}: {exc}") from exc

    _reject_unknown(raw, {"params", "network", "infection", "run", "sweep"}, "<root>")

    ptab = raw.get("params", {})
    _reject_unknown(ptab, {"beta", "gamma", "alpha", "omega", "M", "N"}, "params")
    try:
        params = ModelParams(
            beta=float(_require(ptab, "beta", "params")),
            gamma=float(_require(ptab, "gamma", "params")),
            alpha=float(_require(ptab, "alpha", "params")),
            omega=float(_require(ptab, "omega", "params")),
            M=int(_require(ptab, "M", "params")),
            N=int(_require(ptab, "N", "params")),
        )
    except DomainError as exc:
        raise ConfigError(f"invalid [params]: {exc}") from exc

    ntab = raw.get("network", {})
    _reject_unknown(ntab, {"type", "k", "mean", "variance", "seed"}, "network")
    ntype = _require(ntab, "type", "network")
    if ntype == "regular":
        spec = NetworkSpec(type="regular", k=int(_require(ntab, "k", "network")),
                           seed=int(_require(ntab, "seed", "network")))
        if spec.k > params.M:
            raise ConfigError(f"[network] k={spec.k} exceeds M={params.M}")
    elif ntype == "negative-binomial":
        spec = NetworkSpec(
            type="negative-binomial",
            mean=float(_require(ntab, "mean", "network")),
            variance=float(_require(ntab, "variance", "network")),
            seed=int(_require(ntab, "seed", "network")),
        )
        if not spec.variance > spec.mean > 0:
            raise ConfigError("[network] negative binomial needs variance > mean > 0")
    else:
        raise ConfigError(f"[network] unknown type {ntype!r} "
                          "(expected 'regular' or 'negative-binomial')")

    itab = raw.get("infection", {})
    _reject_unknown(itab, {"i0"}, "infection")
    i0 = int(itab.get("i0", 0))
    if not 0 <= i0 <= params.N:
        raise ConfigError(f"[infection] i0={i0} outside [0, N={params.N}]")

    rtab = raw.get("run", {})
    _reject_unknown(rtab, {"t_max", "sample_dt", "runs", "master_seed",
                           "integrator", "out"}, "run")
    t_max = float(rtab.get("t_max", 100.0))
    sample_dt = float(rtab.get("sample_dt", 1.0))
    runs = int(rtab.get("runs", 1))
    if t_max < 0 or sample_dt <= 0:
        raise ConfigError("[run] needs t_max >= 0 and sample_dt > 0")
    if runs < 1:
        raise ConfigError(f"[run] runs must be >= 1, got {runs}")
    integrator = rtab.get("integrator", "adaptive")
    if integrator not in ("adaptive", "rk4"):
        raise ConfigError(f"[run] integrator must be 'adaptive' or 'rk4', got {integrator!r}")

    sweep = None
    if "sweep" in raw:
        stab = raw["sweep"]
        _reject_unknown(stab, {"beta_grid", "omega_min", "omega_max",
                               "method", "runs"}, "sweep")
        grid = _require(stab, "beta_grid", "sweep")
        if not grid or any(b <= 0 for b in grid):
            raise ConfigError("[sweep] beta_grid must be a nonempty list of positive rates")
        method = stab.get("method", "ode-prevalence")
        if method not in ("ode-prevalence", "ngm-r0", "simulation"):
            raise ConfigError(f"[sweep] unknown method {method!r}")
        lo = float(_require(stab, "omega_min", "sweep"))
        hi = float(_require(stab, "omega_max", "sweep"))
        if not 0 <= lo < hi:
            raise ConfigError("[sweep] needs 0 <= omega_min < omega_max")
        sweep = SweepSpec(beta_grid=tuple(float(b) for b in grid),
                          omega_min=lo, omega_max=hi, method=method,
                          runs=int(stab.get("runs", 50)))

    return RunConfig(
        params=params,
        network=spec,
        i0=i0,
        t_max=t_max,
        sample_dt=sample_dt,
        runs=runs,
        master_seed=int(rtab.get("master_seed", 0)),
        integrator=integrator,
        out=rtab.get("out"),
        sweep=sweep,
    )
