"""Construction of the secure-connectivity graph and its four component notions.

A directed edge ``i -> j`` exists when ``j`` lies strictly inside the secure
out-radius of ``i``, which depends only on the distance from ``i`` to its
closest eavesdropper. The weak graph keeps a pair if either direction is
present, the strong graph if both are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .channel import ChannelParams, GainModel, out_radius
from .geometry import SpatialIndex, Window, _min_image

MODES = ("out", "in", "weak", "strong")


@dataclass(frozen=True, eq=False)
class NetworkRealization:
    legit: np.ndarray
    eaves: np.ndarray
    window: Window
    origin_conditioned: bool = False
    torus: bool = False

    def __post_init__(self):
        object.__setattr__(self, "legit", np.asarray(self.legit, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "eaves", np.asarray(self.eaves, dtype=float).reshape(-1, 2))
        if self.origin_conditioned:
            if len(self.legit) == 0 or np.any(self.legit[0] != 0.0):
                raise ValueError("origin-conditioned realization needs legit[0] == (0, 0)")
            w = self.window
            if not (math.isclose(w.xmin, -w.xmax) and math.isclose(w.ymin, -w.ymax)):
                raise ValueError("origin-conditioned realization needs a window centered on the origin")


def condition_origin(realization: NetworkRealization) -> NetworkRealization:
    """Insert a legitimate node at the origin as index 0 (Slivnyak conditioning)."""
    if not realization.window.contains((0.0, 0.0)):
        raise ValueError(f"window {realization.window} does not contain the origin")
    legit = np.vstack([np.zeros((1, 2)), realization.legit])
    return replace(realization, legit=legit, origin_conditioned=True)


@dataclass(frozen=True, eq=False)
class ISGraph:
    """Directed graph stored as CSR out-adjacency.

    ``indices[indptr[i]:indptr[i+1]]`` are the sorted out-neighbours of node
    ``i`` and ``lengths`` the matching link lengths.
    """

    nodes: np.ndarray
    rho_e: np.ndarray
    out_radius: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    lengths: np.ndarray
    window: Window
    torus: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.indices)

    def out_neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def edges(self) -> set[tuple[int, int]]:
        return set(zip(self.sources().tolist(), self.indices.tolist()))

    def matrix(self, mode: str = "out") -> sparse.csr_matrix:
        """Boolean adjacency for ``mode``; weak and strong are symmetric."""
        if mode not in self._cache:
            a = sparse.csr_matrix(
                (np.ones(self.edge_count, dtype=bool), self.indices, self.indptr), shape=(self.n, self.n)
            )
            if mode == "out":
                m = a
            elif mode == "in":
                m = a.T.tocsr()
            elif mode == "weak":
                m = (a + a.T).tocsr()
            elif mode == "strong":
                m = a.multiply(a.T).tocsr()
            else:
                raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
            m.eliminate_zeros()
            self._cache[mode] = m
        return self._cache[mode]

    def restrict(self, keep: np.ndarray | None = None, radii: np.ndarray | None = None) -> ISGraph:
        """Subgraph on the same node indexing.

        ``keep`` drops every edge touching an excluded node; ``radii`` must not
        exceed the current out-radii and drops edges no longer inside them.
        """
        mask = np.ones(self.edge_count, dtype=bool)
        src = self.sources()
        new_r = self.out_radius
        if keep is not None:
            mask &= keep[src] & keep[self.indices]
        if radii is not None:
            new_r = np.asarray(radii, dtype=float)
            mask &= self.lengths < new_r[src]
        indptr = np.concatenate(([0], np.cumsum(np.bincount(src[mask], minlength=self.n))))
        return ISGraph(self.nodes, self.rho_e, new_r, indptr, self.indices[mask], self.lengths[mask],
                       self.window, self.torus)


def _csr_from_pairs(n, src, dst, lengths):
    order = np.lexsort((dst, src))
    src, dst, lengths = src[order], dst[order], lengths[order]
    indptr = np.concatenate(([0], np.cumsum(np.bincount(src, minlength=n))))
    return indptr.astype(np.int64), dst.astype(np.int64), lengths


def _legit_index(realization: NetworkRealization) -> SpatialIndex:
    pts = realization.legit
    lam = len(pts) / realization.window.area
    cell = 1.0 / math.sqrt(lam) if lam > 0 else None
    return SpatialIndex(pts, realization.window, cell, torus=realization.torus)


def nearest_eaves_distances(realization: NetworkRealization) -> np.ndarray:
    eaves = realization.eaves
    if realization.torus:
        idx = SpatialIndex(eaves, realization.window, None, torus=True)
    else:
        idx = SpatialIndex(eaves, None, None)
    return idx.nearest_distances(realization.legit)


def build_isgraph(realization: NetworkRealization, params: ChannelParams, model: GainModel,
                  brute_force: bool = False) -> ISGraph:
    """Build the directed graph for one realization.

    The default path queries a grid index per node; ``brute_force=True``
    evaluates the gain inequality over every (transmitter, receiver,
    eavesdropper) triple and is meant as a test oracle.
    """
    if brute_force:
        return _build_brute(realization, params, model)
    x = realization.legit
    n = len(x)
    rho_e = nearest_eaves_distances(realization)
    radii = np.asarray(out_radius(params, model, rho_e), dtype=float).reshape(n)
    idx = _legit_index(realization)
    qi, pj, d = idx.query_radius(x, radii)
    loop = qi == pj
    qi, pj, d = qi[~loop], pj[~loop], d[~loop]
    indptr, indices, lengths = _csr_from_pairs(n, qi, pj, d)
    return ISGraph(x, rho_e, radii, indptr, indices, lengths, realization.window, realization.torus)


def _pairwise(a, b, window, torus):
    d = b[None, :, :] - a[:, None, :]
    if torus:
        d[..., 0] = _min_image(d[..., 0], window.width)
        d[..., 1] = _min_image(d[..., 1], window.height)
    return np.hypot(d[..., 0], d[..., 1])


def _build_brute(realization, params, model):
    x, e = realization.legit, realization.eaves
    n = len(x)
    dl = _pairwise(x, x, realization.window, realization.torus)
    if len(e):
        # e* is the eavesdropper with the largest received power
        de = _pairwise(x, e, realization.window, realization.torus)
        star = np.argmax(model.gain(de), axis=1)
        rho_e = de[np.arange(n), star]
    else:
        rho_e = np.full(n, np.inf)
    if params.rho == 0:
        adj = dl < rho_e[:, None]
    else:
        f = 2.0 ** params.rho
        rhs = f * model.gain(rho_e) + (f - 1.0) / params.snr0
        adj = model.gain(dl) > rhs[:, None]
    np.fill_diagonal(adj, False)
    src, dst = np.nonzero(adj)
    radii = np.asarray(out_radius(params, model, rho_e), dtype=float).reshape(n)
    indptr, indices, lengths = _csr_from_pairs(n, src, dst, dl[src, dst])
    return ISGraph(x, rho_e, radii, indptr, indices, lengths, realization.window, realization.torus)


def edge_exists(graph: ISGraph, i: int, j: int, mode: str = "out") -> bool:
    if i == j:
        raise ValueError("edge query needs two distinct nodes")
    fwd = bool(np.isin(j, graph.out_neighbors(i)))
    bwd = bool(np.isin(i, graph.out_neighbors(j)))
    if mode == "out":
        return fwd
    if mode == "in":
        return bwd
    if mode == "weak":
        return fwd or bwd
    if mode == "strong":
        return fwd and bwd
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


@dataclass(frozen=True, eq=False)
class ComponentResult:
    members: np.ndarray
    reached_radius: float
    touched_boundary: bool


def component_members(graph: ISGraph, root: int, mode: str) -> np.ndarray:
    """Sorted indices reachable from ``root`` under ``mode`` (root included)."""
    m = graph.matrix(mode)
    directed = mode in ("out", "in")
    order = csgraph.breadth_first_order(m, root, directed=directed, return_predecessors=False)
    return np.sort(order)


def component(graph: ISGraph, root: int, mode: str = "weak") -> ComponentResult:
    """Component of ``root``.

    ``touched_boundary`` is set when some member's out-disc leaves the
    window, i.e. the component may be truncated by the finite window.
    """
    if not 0 <= root < graph.n:
        raise IndexError(f"root {root} out of range for {graph.n} nodes")
    members = component_members(graph, root, mode)
    pts = graph.nodes[members]
    d = pts - graph.nodes[root]
    if graph.torus:
        d[:, 0] = _min_image(d[:, 0], graph.window.width)
        d[:, 1] = _min_image(d[:, 1], graph.window.height)
    reached = float(np.hypot(d[:, 0], d[:, 1]).max())
    w = graph.window
    r = graph.out_radius[members]
    touched = False
    if not graph.torus:
        touched = bool(np.any((pts[:, 0] - r < w.xmin) | (pts[:, 0] + r > w.xmax)
                              | (pts[:, 1] - r < w.ymin) | (pts[:, 1] + r > w.ymax)))
    return ComponentResult(members, reached, touched)


# Plain-text dump: whitespace-separated columns, one record per line, no headers.
#   nodes.txt  id x y
#   radii.txt  id rho_e r_out
#   edges.txt  i j          (directed i -> j)
#   eaves.txt  id x y

def format_float(v: float) -> str:
    """Fixed notation with 9 significant digits; ``inf``/``nan`` spelled out."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return np.format_float_positional(v, precision=9, unique=False, fractional=False, trim="-")


def write_dump(graph: ISGraph, eaves: np.ndarray, directory) -> dict[str, Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / f"{k}.txt" for k in ("nodes", "radii", "edges", "eaves")}
    paths["nodes"].write_text("".join(f"{i} {format_float(x)} {format_float(y)}\n" for i, (x, y) in enumerate(graph.nodes)))
    paths["radii"].write_text("".join(
        f"{i} {format_float(a)} {format_float(b)}\n" for i, (a, b) in enumerate(zip(graph.rho_e, graph.out_radius))))
    paths["edges"].write_text("".join(f"{i} {j}\n" for i, j in zip(graph.sources(), graph.indices)))
    paths["eaves"].write_text("".join(f"{i} {format_float(x)} {format_float(y)}\n" for i, (x, y) in enumerate(eaves)))
    return paths


def read_dump(directory) -> dict[str, np.ndarray]:
    """Load a dump written by :func:`write_dump` back into arrays."""
    d = Path(directory)

    def load(name, cols, dtype=float):
        text = (d / f"{name}.txt").read_text().split()
        return np.array(text, dtype=dtype).reshape(-1, cols)

    return {
        "nodes": load("nodes", 3)[:, 1:],
        "radii": load("radii", 3)[:, 1:],
        "edges": load("edges", 2, np.int64),
        "eaves": load("eaves", 3)[:, 1:],
    }
