"""Problem instances: topology, spreading parameters, and serialization.

An instance bundles an undirected graph, per-edge transmission
probabilities and contact costs, a recovery chain, an initial epidemic
state, and the seed it was generated from.  Instances round-trip
exactly through a versioned JSON document, so a saved file pins every
bit of a simulation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError, ParseError
from .phase_type import PhaseTypeChain, from_pmf
from .rng import stream

__all__ = [
    "Graph",
    "SpreadParams",
    "InstanceSpec",
    "Instance",
    "build_er_graph",
    "sample_params",
    "build_instance",
    "dumps_instance",
    "loads_instance",
    "write_instance",
    "read_instance",
]

FORMAT_NAME = "sis-epidemic-instance"
FORMAT_VERSION = 1

# Child stream tags used by build_instance.
_TAG_GRAPH = 0
_TAG_PARAMS = 1
_TAG_INIT = 2


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    Edges are canonical ``(i, j)`` pairs with ``i < j``, sorted
    ascending; no self loops, no duplicates.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("graph needs at least one node")
        canon = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ParameterError(f"self loop at node {i}")
            if i > j:
                i, j = j, i
            if not (0 <= i < j < self.n):
                raise ParameterError(f"edge ({i}, {j}) outside node range")
            canon.append((i, j))
        canon.sort()
        for a, b in zip(canon, canon[1:]):
            if a == b:
                raise ParameterError(f"duplicate edge {a}")
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """Edges as an (m, 2) int array."""
        arr = np.array(self.edges, dtype=np.int64).reshape(self.m, 2)
        arr.setflags(write=False)
        return arr

    @cached_property
    def _adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, neighbor, edge_id) in CSR layout, neighbors ascending."""
        if self.m == 0:
            return (
                np.zeros(self.n + 1, dtype=np.int64),
                np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.int64),
            )
        e = self.edge_array
        ends = np.concatenate([e[:, 0], e[:, 1]])
        other = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.tile(np.arange(self.m, dtype=np.int64), 2)
        order = np.lexsort((other, ends))
        ends, other, eid = ends[order], other[order], eid[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, ends + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, other, eid

    def neighbors(self, i: int) -> np.ndarray:
        """Neighbor ids of node ``i``, ascending."""
        indptr, other, _ = self._adjacency
        return other[indptr[i] : indptr[i + 1]]

    def degree(self, i: int) -> int:
        indptr, _, _ = self._adjacency
        return int(indptr[i + 1] - indptr[i])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SpreadParams:
    """Per-edge transmission probabilities and contact costs.

    ``beta[k]`` and ``cost[k]`` belong to ``graph.edges[k]``, so the
    parameter maps and the edge set share exactly the same keys.
    """

    graph: Graph
    beta: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        cost = np.asarray(self.cost, dtype=float)
        m = self.graph.m
        if beta.shape != (m,) or cost.shape != (m,):
            raise ParameterError("beta and cost must have one entry per edge")
        if not np.isfinite(beta).all() or (beta < 0).any() or (beta > 1).any():
            raise ParameterError("transmission probabilities must lie in [0, 1]")
        if not np.isfinite(cost).all() or (cost < 0).any():
            raise ParameterError("contact costs must be finite and non-negative")
        beta.setflags(write=False)
        cost.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "cost", cost)

    def beta_of(self, i: int, j: int) -> float:
        return float(self.beta[self._edge_index[(min(i, j), max(i, j))]])

    def cost_of(self, i: int, j: int) -> float:
        return float(self.cost[self._edge_index[(min(i, j), max(i, j))]])

    @cached_property
    def _edge_index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.graph.edges)}

    def __eq__(self, other):
        if not isinstance(other, SpreadParams):
            return NotImplemented
        return (
            self.graph == other.graph
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.cost, other.cost)
        )

    __hash__ = None


@dataclass(frozen=True)
class InstanceSpec:
    """Generative description of a random instance.

    ``cost_support`` is the set of values edge costs are drawn from
    uniformly; ``recovery_pmf[t-1]`` is the probability a fresh
    infection lasts exactly ``t`` steps; ``init_infected_frac`` is the
    fraction of nodes (rounded to nearest, at least one when positive)
    seeded in stage 1.
    """

    n: int
    edge_prob: float
    cost_support: tuple[float, ...]
    recovery_pmf: tuple[float, ...]
    init_infected_frac: float
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n must be at least 1")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ParameterError("edge_prob must lie in [0, 1]")
        if len(self.cost_support) == 0:
            raise ParameterError("cost_support must be non-empty")
        if any(not np.isfinite(c) or c < 0 for c in self.cost_support):
            raise ParameterError("cost_support values must be finite and non-negative")
        if not 0.0 <= self.init_infected_frac <= 1.0:
            raise ParameterError("init_infected_frac must lie in [0, 1]")
        # Delegates pmf validation; raises ParameterError on bad mass.
        from_pmf(self.recovery_pmf)


@dataclass(frozen=True, eq=False)
class Instance:
    """A fully specified simulation problem.

    ``init_codes[i]`` is 0 for susceptible or the 1-based infection
    stage of node ``i``; ``seed`` records the generation seed (0 for
    hand-built instances).
    """

    graph: Graph
    params: SpreadParams
    chain: PhaseTypeChain
    init_codes: np.ndarray
    seed: int = 0

    def __post_init__(self):
        codes = np.asarray(self.init_codes, dtype=np.int64)
        if codes.shape != (self.graph.n,):
            raise ParameterError("init_codes must have one entry per node")
        if (codes < 0).any() or (codes > self.chain.p).any():
            raise ParameterError("init_codes entries must lie in 0..p")
        if self.params.graph != self.graph:
            raise ParameterError("params built for a different graph")
        codes.setflags(write=False)
        object.__setattr__(self, "init_codes", codes)

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, neighbor, beta, cost, edge_id), neighbors ascending."""
        indptr, other, eid = self.graph._adjacency
        beta = self.params.beta[eid] if eid.size else np.empty(0)
        cost = self.params.cost[eid] if eid.size else np.empty(0)
        beta.setflags(write=False)
        cost.setflags(write=False)
        return indptr, other, beta, cost, eid

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.params == other.params
            and self.chain == other.chain
            and np.array_equal(self.init_codes, other.init_codes)
            and self.seed == other.seed
        )

    __hash__ = None


def build_er_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi graph: each of the n(n-1)/2 pairs kept with prob ``p``."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    if not 0.0 <= p <= 1.0:
        raise ParameterError("edge probability must lie in [0, 1]")
    ii, jj = np.triu_indices(n, k=1)
    keep = rng.random(ii.size) < p
    edges = tuple(zip(ii[keep].tolist(), jj[keep].tolist()))
    return Graph(n, edges)


def sample_params(
    graph: Graph, cost_support: tuple[float, ...], rng: np.random.Generator
) -> SpreadParams:
    """Uniform(0,1) transmission probabilities, costs uniform on the support."""
    support = np.asarray(cost_support, dtype=float)
    beta = rng.random(graph.m)
    cost = support[rng.integers(0, support.size, size=graph.m)]
    return SpreadParams(graph, beta, cost)


def build_instance(spec: InstanceSpec) -> Instance:
    """Materialize ``spec`` deterministically from its seed."""
    graph = build_er_graph(spec.n, spec.edge_prob, stream(spec.seed, _TAG_GRAPH))
    params = sample_params(graph, spec.cost_support, stream(spec.seed, _TAG_PARAMS))
    chain = from_pmf(spec.recovery_pmf)
    codes = np.zeros(spec.n, dtype=np.int64)
    k = int(round(spec.init_infected_frac * spec.n))
    if spec.init_infected_frac > 0:
        k = max(k, 1)
    if k > 0:
        chosen = stream(spec.seed, _TAG_INIT).choice(spec.n, size=k, replace=False)
        codes[chosen] = 1
    return Instance(graph, params, chain, codes, seed=spec.seed)


def dumps_instance(instance: Instance) -> str:
    """Serialize to a versioned JSON document; floats round-trip exactly."""
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": instance.graph.n,
        "edges": [list(e) for e in instance.graph.edges],
        "beta": instance.params.beta.tolist(),
        "cost": instance.params.cost.tolist(),
        "chain": instance.chain.transition.tolist(),
        "initial_state": instance.init_codes.tolist(),
        "seed": instance.seed,
    }
    return json.dumps(doc, indent=1)


def loads_instance(text: str) -> Instance:
    """Parse a document produced by ``dumps_instance``.

    Raises ParseError (with the byte offset for syntax problems) on a
    malformed document and ParameterError on out-of-domain values.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", offset=e.pos) from None
    if not isinstance(doc, dict):
        raise ParseError("document root must be an object")
    if doc.get("format") != FORMAT_NAME:
        raise ParseError(f"unrecognized format {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported version {doc.get('version')!r}")
    required = ("n", "edges", "beta", "cost", "chain", "initial_state", "seed")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ParseError(f"missing fields: {', '.join(missing)}")
    try:
        graph = Graph(int(doc["n"]), tuple((int(i), int(j)) for i, j in doc["edges"]))
        params = SpreadParams(
            graph,
            np.asarray(doc["beta"], dtype=float),
            np.asarray(doc["cost"], dtype=float),
        )
        chain = PhaseTypeChain(np.asarray(doc["chain"], dtype=float))
        codes = np.asarray(doc["initial_state"], dtype=np.int64)
        return Instance(graph, params, chain, codes, seed=int(doc["seed"]))
    except (TypeError, ValueError) as e:
        if isinstance(e, ParameterError):
            raise
        raise ParseError(f"malformed field: {e}") from None


def write_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_instance(instance))
        fh.write("\n")


def read_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_instance(fh.read())
