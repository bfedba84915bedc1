"""Initial-network construction and infection seeding.

Graphs are realized by stub matching followed by degree-preserving
double-edge-swap repair of self-loops and duplicate pairings, so the
realized degrees always equal the targets.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import DomainError, GenerationError
from .state import negative_binomial_shape
from .simulate import Graph

REPAIR_SWEEP_LIMIT = 10_000


def _stub_match_with_repair(degrees: np.ndarray, M: int,
                            rng: np.random.Generator) -> Graph:
    N = degrees.size
    if degrees.sum() % 2 != 0:
        raise DomainError("degree sequence must have even sum")
    if degrees.min() < 0 or degrees.max() > M:
        raise DomainError(f"degrees must lie in [0, {M}]")
    if degrees.max() >= N:
        raise GenerationError(f"degree {degrees.max()} infeasible for N={N} simple graph")

    stubs = np.repeat(np.arange(N), degrees)
    rng.shuffle(stubs)

    edges: set[tuple[int, int]] = set()
    edge_list: list[tuple[int, int]] = []
    defects: list[tuple[int, int]] = []
    for a, b in zip(stubs[0::2], stubs[1::2]):
        a, b = int(a), int(b)
        key = (a, b) if a < b else (b, a)
        if a != b and key not in edges:
            edges.add(key)
            edge_list.append(key)
        else:
            defects.append(key)

    # place each defective pair by stealing a random existing edge: the
    # swap (a,b)+(u,v) -> (a,u)+(b,v) preserves every degree
    sweeps = 0
    while defects:
        sweeps += 1
        if sweeps > REPAIR_SWEEP_LIMIT or not edge_list:
            raise GenerationError(
                f"edge-swap repair did not converge ({len(defects)} defects left)"
            )
        a, b = defects.pop()
        placed = False
        for _ in range(len(edge_list)):
            j = int(rng.integers(len(edge_list)))
            u, v = edge_list[j]
            if rng.random() < 0.5:
                u, v = v, u
            e1 = (a, u) if a < u else (u, a)
            e2 = (b, v) if b < v else (v, b)
            if a == u or b == v or e1 in edges or e2 in edges or e1 == e2:
                continue
            edges.remove((u, v) if u < v else (v, u))
            edge_list[j] = edge_list[-1]
            edge_list.pop()
            for e in (e1, e2):
                edges.add(e)
                edge_list.append(e)
            placed = True
            break
        if not placed:
            defects.append((a, b))

    return Graph.from_edges(N, M, edge_list)


def regular_random(N: int, k: int, M: int, seed) -> Graph:
    """Random simple graph in which every node has degree exactly k."""
    if k > M:
        raise DomainError(f"k={k} exceeds degree cap M={M}")
    if k >= N:
        raise GenerationError(f"k={k} infeasible for N={N}")
    if (N * k) % 2 != 0:
        raise DomainError(f"N*k must be even, got N={N}, k={k}")
    rng = np.random.default_rng(seed)
    return _stub_match_with_repair(np.full(N, k, dtype=np.int64), M, rng)


def negative_binomial_degrees(N: int, mean: float, variance: float, M: int,
                              seed) -> np.ndarray:
    """Sample N degrees from a moment-matched negative binomial, capped at M.

    Draws above M are resampled (no pile-up at the cap); an odd total is
    fixed by redrawing uniformly chosen entries until the sum is even.
    """
    r, p = negative_binomial_shape(mean, variance)
    rng = np.random.default_rng(seed)

    def draw(size):
        out = rng.negative_binomial(r, p, size=size)
        while True:
            over = out > M
            if not over.any():
                return out
            out[over] = rng.negative_binomial(r, p, size=int(over.sum()))

    degrees = draw(N).astype(np.int64)
    while degrees.sum() % 2 != 0:
        degrees[rng.integers(N)] = draw(1)[0]
    return degrees


def configuration_model(degrees: np.ndarray, M: int, seed) -> Graph:
    """Realize a degree sequence as a simple graph (stub matching + repair)."""
    rng = np.random.default_rng(seed)
    return _stub_match_with_repair(np.asarray(degrees, dtype=np.int64), M, rng)


def seed_infection(N: int, I0: int, seed) -> set[int]:
    """Uniformly random I0-subset of nodes, deterministic per seed."""
    if not 0 <= I0 <= N:
        raise DomainError(f"I0 must be in [0, N], got {I0}")
    rng = np.random.default_rng(seed)
    return set(int(v) for v in rng.choice(N, size=I0, replace=False))


def save_degree_sequence(path, degrees: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "degree"])
        for v, d in enumerate(degrees):
            writer.writerow([v, int(d)])
