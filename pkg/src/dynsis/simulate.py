"""Event-driven stochastic SIS simulation on an explicit dynamic network.

Exact continuous-time sampling over four event channels: per-link
infection, per-node recovery, per-link deletion, and capped link
creation.  The creation channel fires at rate alpha * phi / 2 and draws
both endpoints proportionally to their free stubs, so each node's degree
grows at alpha * (M - k), consistent with the mean-field equations.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import DomainError, GenerationError
from .ode import Trajectory, sample_grid
from .state import CompartmentIndex, DegreeDistribution, ModelParams


class Graph:
    """Undirected simple graph with a hard per-node degree cap M."""

    def __init__(self, N: int, M: int):
        if N < 1 or M < 1:
            raise DomainError(f"need N >= 1 and M >= 1, got N={N}, M={M}")
        self.N = N
        self.M = M
        self.adjacency: list[set[int]] = [set() for _ in range(N)]
        self.degrees = np.zeros(N, dtype=np.int64)

    @classmethod
    def from_edges(cls, N: int, M: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        g = cls(N, M)
        for u, v in edges:
            g.add_edge(u, v)
        return g

    def copy(self) -> "Graph":
        g = Graph(self.N, self.M)
        g.adjacency = [set(nbrs) for nbrs in self.adjacency]
        g.degrees = self.degrees.copy()
        return g

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise DomainError(f"self-loop at node {u}")
        if v in self.adjacency[u]:
            raise DomainError(f"duplicate edge ({u}, {v})")
        if self.degrees[u] >= self.M or self.degrees[v] >= self.M:
            raise DomainError(f"edge ({u}, {v}) would exceed degree cap {self.M}")
        self.adjacency[u].add(v)
        self.adjacency[v].add(u)
        self.degrees[u] += 1
        self.degrees[v] += 1

    def remove_edge(self, u: int, v: int) -> None:
        self.adjacency[u].remove(v)
        self.adjacency[v].remove(u)
        self.degrees[u] -= 1
        self.degrees[v] -= 1

    def edge_count(self) -> int:
        return int(self.degrees.sum()) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.N) for v in self.adjacency[u] if u < v]

    def validate(self) -> None:
        """Full structural scan: symmetry, no self-loops, cap respected."""
        for u in range(self.N):
            if u in self.adjacency[u]:
                raise DomainError(f"self-loop at node {u}")
            if len(self.adjacency[u]) > self.M:
                raise DomainError(f"node {u} exceeds degree cap")
            if len(self.adjacency[u]) != self.degrees[u]:
                raise DomainError(f"degree counter stale at node {u}")
            for v in self.adjacency[u]:
                if u not in self.adjacency[v]:
                    raise DomainError(f"asymmetric edge ({u}, {v})")

    def save_edge_list(self, path) -> None:
        """Edge list with a `# N=.. M=..` header, one `u,v` pair per line."""
        with open(path, "w") as fh:
            fh.write(f"# N={self.N} M={self.M}\n")
            for u, v in self.edges():
                fh.write(f"{u},{v}\n")

    @classmethod
    def load_edge_list(cls, path) -> "Graph":
        with open(path) as fh:
            header = fh.readline().strip()
            parts = header.replace("#", "").split()
            try:
                meta = dict(p.split("=") for p in parts)
                N, M = int(meta["N"]), int(meta["M"])
            except (ValueError, KeyError) as exc:
                raise DomainError(f"bad edge-list header {header!r}") from exc
            g = cls(N, M)
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                u, v = (int(x) for x in line.split(","))
                g.add_edge(u, v)
        return g


class IndexedSet:
    """Set with O(1) insert, delete, and uniform random choice."""

    def __init__(self):
        self.items: list = []
        self._pos: dict = {}

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item) -> bool:
        return item in self._pos

    def add(self, item) -> None:
        if item in self._pos:
            raise KeyError(f"{item} already present")
        self._pos[item] = len(self.items)
        self.items.append(item)

    def remove(self, item) -> None:
        pos = self._pos.pop(item)
        last = self.items.pop()
        if pos < len(self.items):
            self.items[pos] = last
            self._pos[last] = pos

    def choose(self, rng: np.random.Generator):
        return self.items[rng.integers(len(self.items))]


def _edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class SimState:
    """Graph plus disease labels with incrementally maintained event-rate counters."""

    def __init__(self, graph: Graph, infected: Iterable[int]):
        self.graph = graph
        self.infected = np.zeros(graph.N, dtype=bool)
        self.infected_nodes = IndexedSet()
        self.si_edges = IndexedSet()
        self.edge_set = IndexedSet()
        # infected-neighbour count per node; susceptible count is deg - this
        self.inf_neighbors = np.zeros(graph.N, dtype=np.int64)

        for v in infected:
            if self.infected[v]:
                raise DomainError(f"node {v} listed infected twice")
            self.infected[v] = True
            self.infected_nodes.add(int(v))
        for u, v in graph.edges():
            self.edge_set.add((u, v))
            if self.infected[u]:
                self.inf_neighbors[v] += 1
            if self.infected[v]:
                self.inf_neighbors[u] += 1
            if self.infected[u] != self.infected[v]:
                self.si_edges.add((u, v))

    @property
    def n_infected(self) -> int:
        return len(self.infected_nodes)

    @property
    def n_edges(self) -> int:
        return self.graph.edge_count()

    @property
    def n_si_edges(self) -> int:
        return len(self.si_edges)

    @property
    def phi(self) -> int:
        return self.graph.N * self.graph.M - 2 * self.n_edges

    # -- event updates ------------------------------------------------

    def infect(self, v: int) -> None:
        self.infected[v] = True
        self.infected_nodes.add(v)
        for u in self.graph.adjacency[v]:
            self.inf_neighbors[u] += 1
            key = _edge_key(u, v)
            if self.infected[u]:
                self.si_edges.remove(key)
            else:
                self.si_edges.add(key)

    def recover(self, v: int) -> None:
        self.infected[v] = False
        self.infected_nodes.remove(v)
        for u in self.graph.adjacency[v]:
            self.inf_neighbors[u] -= 1
            key = _edge_key(u, v)
            if self.infected[u]:
                self.si_edges.add(key)
            else:
                self.si_edges.remove(key)

    def add_edge(self, u: int, v: int) -> None:
        self.graph.add_edge(u, v)
        self.edge_set.add(_edge_key(u, v))
        if self.infected[u]:
            self.inf_neighbors[v] += 1
        if self.infected[v]:
            self.inf_neighbors[u] += 1
        if self.infected[u] != self.infected[v]:
            self.si_edges.add(_edge_key(u, v))

    def remove_edge(self, u: int, v: int) -> None:
        self.graph.remove_edge(u, v)
        self.edge_set.remove(_edge_key(u, v))
        if self.infected[u]:
            self.inf_neighbors[v] -= 1
        if self.infected[v]:
            self.inf_neighbors[u] -= 1
        if self.infected[u] != self.infected[v]:
            self.si_edges.remove(_edge_key(u, v))

    # -- observation ---------------------------------------------------

    def census(self, index: CompartmentIndex) -> np.ndarray:
        """Count nodes per (class, s, i) compartment as a flat state vector."""
        deg = self.graph.degrees
        i_cnt = self.inf_neighbors
        s_cnt = deg - i_cnt
        base = deg * (deg + 1)
        codes = base + (deg - s_cnt) + np.where(self.infected, deg + 1, 0)
        counts = np.bincount(codes, minlength=index.size)
        return counts.astype(float)

    def consistency_check(self) -> None:
        """Full rescan of every incrementally maintained counter."""
        self.graph.validate()
        si = 0
        for u in range(self.graph.N):
            recount = sum(1 for w in self.graph.adjacency[u] if self.infected[w])
            if recount != self.inf_neighbors[u]:
                raise DomainError(f"stale infected-neighbour count at node {u}")
        for u, v in self.graph.edges():
            if _edge_key(u, v) not in self.edge_set:
                raise DomainError(f"edge ({u}, {v}) missing from indexed set")
            if self.infected[u] != self.infected[v]:
                si += 1
                if _edge_key(u, v) not in self.si_edges:
                    raise DomainError(f"missing SI edge ({u}, {v})")
        if si != self.n_si_edges:
            raise DomainError(f"SI count {self.n_si_edges} != rescan {si}")
        if len(self.edge_set) != self.graph.edge_count():
            raise DomainError("stale edge count")
        if int(self.infected.sum()) != self.n_infected:
            raise DomainError("stale infected-node count")


def total_rates(sim: SimState, params: ModelParams) -> tuple[float, float, float, float]:
    """(infection, recovery, deletion, creation) channel rates."""
    r_inf = params.beta * sim.n_si_edges
    r_rec = params.gamma * sim.n_infected
    r_del = params.omega * sim.n_edges
    r_add = params.alpha * sim.phi / 2.0
    return r_inf, r_rec, r_del, r_add


def _draw_free_stub_node(sim: SimState, rng: np.random.Generator,
                         exclude: int = -1) -> int:
    # rejection sampling: accept node v with probability (M - deg_v)/M,
    # which is exact for the stub-proportional law
    N, M = sim.graph.N, sim.graph.M
    deg = sim.graph.degrees
    while True:
        v = int(rng.integers(N))
        if v == exclude:
            continue
        if rng.random() * M < M - deg[v]:
            return v


def _apply_random_event(sim: SimState, rng: np.random.Generator,
                        rates: tuple[float, float, float, float],
                        ) -> tuple[str, tuple[int, ...]]:
    """Pick an event category proportionally to ``rates`` and execute it.

    Returns the event kind and the nodes it touched.
    """
    r_inf, r_rec, r_del, r_add = rates
    pick = rng.random() * (r_inf + r_rec + r_del + r_add)

    if pick < r_inf:
        u, v = sim.si_edges.choose(rng)
        sim.infect(v if sim.infected[u] else u)
        return "infect", (u, v)
    pick -= r_inf
    if pick < r_rec:
        v = sim.infected_nodes.choose(rng)
        sim.recover(v)
        return "recover", (v,)
    pick -= r_rec
    if pick < r_del:
        u, v = sim.edge_set.choose(rng)
        sim.remove_edge(u, v)
        return "delete", (u, v)

    u = _draw_free_stub_node(sim, rng)
    if sim.phi - (sim.graph.M - sim.graph.degrees[u]) <= 0:
        return "create-noop", (u,)  # every other node is saturated
    v = _draw_free_stub_node(sim, rng, exclude=u)
    if sim.graph.has_edge(u, v):
        return "create-noop", (u, v)  # thinning keeps the total rate exact
    sim.add_edge(u, v)
    return "create", (u, v)


def _local_debug_check(sim: SimState, kind: str, touched: tuple[int, ...]) -> None:
    """O(degree) invariant checks around the nodes an event touched."""
    g = sim.graph
    for v in touched:
        if len(g.adjacency[v]) != g.degrees[v] or g.degrees[v] > g.M:
            raise DomainError(f"degree bookkeeping broken at node {v} after {kind}")
        if v in g.adjacency[v]:
            raise DomainError(f"self-loop at node {v} after {kind}")
        recount = sum(1 for w in g.adjacency[v] if sim.infected[w])
        if recount != sim.inf_neighbors[v]:
            raise DomainError(f"infected-neighbour count stale at {v} after {kind}")
        for w in g.adjacency[v]:
            if v not in g.adjacency[w]:
                raise DomainError(f"asymmetric edge ({v}, {w}) after {kind}")


def step(sim: SimState, params: ModelParams, rng: np.random.Generator,
         ) -> tuple[str, float]:
    """Advance by one event; returns (event kind, waiting time).

    Events: ``infect``, ``recover``, ``delete``, ``create``, and
    ``create-noop`` when the drawn pair is already adjacent (or no valid
    partner exists); time advances either way so the total rate stays
    exact.  Returns ``("absorbed", inf)`` when nothing can ever fire.
    """
    rates = total_rates(sim, params)
    total = sum(rates)
    if total <= 0.0:
        return "absorbed", float("inf")
    dt = rng.exponential(1.0 / total)
    kind, _ = _apply_random_event(sim, rng, rates)
    return kind, dt


def run(graph0: Graph, infected0: Iterable[int], params: ModelParams,
        t_max: float, sample_dt: float, seed,
        debug: bool = False) -> Trajectory:
    """Simulate one realization, sampling the compartment census on a grid.

    The grid is filled by carrying the last event's state forward; the
    run continues to t_max even after extinction so network observables
    stay comparable to the deterministic model.  Deterministic given
    (inputs, seed); the input graph is not mutated.

    ``debug=True`` adds O(degree) invariant checks around every event and
    a full counter rescan at each sampling instant.
    """
    if graph0.N != params.N or graph0.M != params.M:
        raise DomainError("graph size/cap disagree with params")
    rng = np.random.default_rng(seed)
    sim = SimState(graph0.copy(), infected0)
    index = CompartmentIndex(params.M)
    times = sample_grid(t_max, sample_dt)
    states = np.empty((times.size, index.size))

    t = 0.0
    next_sample = 0
    while next_sample < times.size:
        rates = total_rates(sim, params)
        total = sum(rates)
        if total <= 0.0:
            while next_sample < times.size:  # frozen: carry state to the end
                states[next_sample] = sim.census(index)
                next_sample += 1
            break
        t_next = t + rng.exponential(1.0 / total)
        if next_sample < times.size and times[next_sample] < t_next:
            census = sim.census(index)  # state holds on [t, t_next)
            if debug:
                sim.consistency_check()
            while next_sample < times.size and times[next_sample] < t_next:
                states[next_sample] = census
                next_sample += 1
        if next_sample >= times.size:
            break
        kind, touched = _apply_random_event(sim, rng, rates)
        if debug:
            _local_debug_check(sim, kind, touched)
        t = t_next

    return Trajectory(times=times, states=states, index=index, n_nodes=float(params.N))


@dataclass
class EnsembleResult:
    """Per-run observable series plus across-run summary statistics."""

    times: np.ndarray
    prevalence: np.ndarray   # shape (runs, samples)
    mean_degree: np.ndarray
    edges: np.ndarray

    @property
    def runs(self) -> int:
        return self.prevalence.shape[0]

    def summary(self) -> dict[str, np.ndarray]:
        return {
            "I_mean": self.prevalence.mean(axis=0),
            "I_std": self.prevalence.std(axis=0),
            "k_mean": self.mean_degree.mean(axis=0),
            "k_std": self.mean_degree.std(axis=0),
            "edges_mean": self.edges.mean(axis=0),
        }

    def save_runs_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "run_id", "I", "mean_degree", "edges"])
            for r in range(self.runs):
                for j, t in enumerate(self.times):
                    writer.writerow([
                        f"{t:.17g}", r, f"{self.prevalence[r, j]:.17g}",
                        f"{self.mean_degree[r, j]:.17g}", f"{self.edges[r, j]:.17g}",
                    ])

    def save_summary_csv(self, path) -> None:
        s = self.summary()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "I_mean", "I_std", "k_mean", "k_std", "edges_mean"])
            for j, t in enumerate(self.times):
                writer.writerow([f"{t:.17g}"] + [
                    f"{s[c][j]:.17g}"
                    for c in ("I_mean", "I_std", "k_mean", "k_std", "edges_mean")
                ])


def read_runs_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["t", "run_id", "I", "mean_degree", "edges"]
        if header != expected:
            raise DomainError(f"unexpected per-run header: {header}")
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows) if rows else np.empty((0, len(expected)))
    return {name: data[:, j] for j, name in enumerate(expected)}


def read_summary_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["t", "I_mean", "I_std", "k_mean", "k_std", "edges_mean"]
        if header != expected:
            raise DomainError(f"unexpected summary header: {header}")
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows) if rows else np.empty((0, len(expected)))
    return {name: data[:, j] for j, name in enumerate(expected)}


GraphFactory = Callable[[np.random.Generator], tuple[Graph, Iterable[int]]]


def ensemble(graph_factory: GraphFactory, params: ModelParams, runs: int,
             t_max: float, sample_dt: float, master_seed: int,
             workers: int = 1) -> EnsembleResult:
    """Run independent realizations with split substreams and aggregate.

    Run r draws its network and event stream from substream r of
    ``master_seed``, and results are gathered by run index, so the output
    is identical for any worker count or execution order.
    """
    if runs < 1:
        raise DomainError(f"runs must be >= 1, got {runs}")
    children = np.random.SeedSequence(master_seed).spawn(runs)

    def one_run(r: int) -> Trajectory:
        rng = np.random.default_rng(children[r])
        graph, infected = graph_factory(rng)
        return run(graph, infected, params, t_max, sample_dt, rng)

    if workers <= 1:
        trajectories = [one_run(r) for r in range(runs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajectories = list(pool.map(one_run, range(runs)))

    times = trajectories[0].times
    return EnsembleResult(
        times=times,
        prevalence=np.stack([tr.prevalence for tr in trajectories]),
        mean_degree=np.stack([tr.mean_degree for tr in trajectories]),
        edges=np.stack([tr.edges for tr in trajectories]),
    )


def empirical_degree_distribution(sim: SimState) -> DegreeDistribution:
    """Normalized histogram of current node degrees."""
    counts = np.bincount(sim.graph.degrees, minlength=sim.graph.M + 1)
    return DegreeDistribution(counts / counts.sum())
