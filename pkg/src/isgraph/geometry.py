"""Poisson point sampling in rectangular windows and grid-based spatial queries.

Point sets are ``(n, 2)`` float arrays throughout; a single point is any
length-2 sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Point = tuple[float, float]


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]`` in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        vals = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"window corners must be finite, got {vals}")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"window must have positive area, got {vals}")

    @classmethod
    def centered(cls, half_width: float, half_height: float | None = None) -> Window:
        hh = half_width if half_height is None else half_height
        return cls(-half_width, -hh, half_width, hh)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def inflate(self, pad: float) -> Window:
        if pad < 0:
            raise ValueError(f"padding must be >= 0, got {pad}")
        return Window(self.xmin - pad, self.ymin - pad, self.xmax + pad, self.ymax + pad)

    def contains(self, p) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax


@dataclass(frozen=True)
class PoissonConfig:
    """Densities (nodes/m^2) of the two independent processes plus sampling window."""

    lambda_l: float
    lambda_e: float
    window: Window
    eaves_padding: float
    seed: int

    def __post_init__(self):
        if self.lambda_l < 0 or self.lambda_e < 0:
            raise ValueError("densities must be non-negative")
        if self.eaves_padding < 0:
            raise ValueError("eaves_padding must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def trial_rng(master_seed: int, trial_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for ``(master_seed, trial_index, stream)``.

    Streams are derived by ``SeedSequence`` spawn keys, so a trial's draws do
    not depend on which worker runs it or in what order.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial_index), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_poisson(lam: float, window: Window, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous Poisson process of density ``lam`` restricted to ``window``."""
    if lam < 0 or not math.isfinite(lam):
        raise ValueError(f"density must be finite and >= 0, got {lam}")
    n = rng.poisson(lam * window.area) if lam > 0 else 0
    pts = np.empty((n, 2))
    pts[:, 0] = rng.uniform(window.xmin, window.xmax, n)
    pts[:, 1] = rng.uniform(window.ymin, window.ymax, n)
    return pts


def default_eaves_padding(lambda_e: float) -> float:
    """99.9th percentile of the nearest-eavesdropper distance at density ``lambda_e``."""
    if lambda_e <= 0:
        return 0.0
    return math.sqrt(math.log(1000.0) / (math.pi * lambda_e))


def default_cell_size(lambda_l: float, lambda_e: float, window: Window) -> float:
    lam = max(lambda_l, lambda_e)
    longest = max(window.width, window.height)
    if lam <= 0:
        return longest
    return min(1.0 / math.sqrt(lam), longest)


def _min_image(d: np.ndarray, period: float) -> np.ndarray:
    return d - period * np.round(d / period)


class SpatialIndex:
    """Uniform grid over a window; immutable once built.

    Points are bucketed by cell in a CSR layout (``order``, ``starts``,
    ``counts``). Queries visit only the cells that can hold a hit and check
    exact distances, so they return what a linear scan would.

    With ``torus=True`` the window is treated as periodic and all distances
    are minimum-image distances. Every point must then lie in the window.
    """

    def __init__(self, points, window: Window | None = None, cell_size: float | None = None,
                 torus: bool = False):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if window is None:
            if len(pts) == 0:
                window = Window(0.0, 0.0, 1.0, 1.0)
            else:
                lo, hi = pts.min(axis=0), pts.max(axis=0)
                window = Window(lo[0], lo[1], max(hi[0], lo[0] + 1e-9), max(hi[1], lo[1] + 1e-9))
        elif len(pts) and not torus:
            # grow to cover stray points so the distance bounds stay valid
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            window = Window(min(window.xmin, lo[0]), min(window.ymin, lo[1]),
                            max(window.xmax, hi[0]), max(window.ymax, hi[1]))
        if torus and len(pts):
            inside = ((pts[:, 0] >= window.xmin) & (pts[:, 0] <= window.xmax)
                      & (pts[:, 1] >= window.ymin) & (pts[:, 1] <= window.ymax))
            if not inside.all():
                raise ValueError("torus index requires every point inside the window")
        if cell_size is None:
            cell_size = max(window.width, window.height) / max(1.0, math.sqrt(len(pts)))
        if cell_size <= 0:
            raise ValueError("cell size must be positive")

        self.points = pts
        self.window = window
        self.torus = torus
        if torus:
            self.nx = max(1, int(window.width // cell_size))
            self.ny = max(1, int(window.height // cell_size))
        else:
            self.nx = max(1, math.ceil(window.width / cell_size))
            self.ny = max(1, math.ceil(window.height / cell_size))
        self.cell_x = window.width / self.nx
        self.cell_y = window.height / self.ny

        cx, cy = self._cells(pts)
        cid = cx * self.ny + cy
        self.order = np.argsort(cid, kind="stable")
        self.counts = np.bincount(cid, minlength=self.nx * self.ny)
        self.starts = np.concatenate(([0], np.cumsum(self.counts)[:-1]))
        self.points.setflags(write=False)

    def __len__(self):
        return len(self.points)

    def _cells(self, q: np.ndarray):
        cx = np.floor((q[:, 0] - self.window.xmin) / self.cell_x).astype(np.int64)
        cy = np.floor((q[:, 1] - self.window.ymin) / self.cell_y).astype(np.int64)
        if self.torus:
            return cx % self.nx, cy % self.ny
        return np.clip(cx, 0, self.nx - 1), np.clip(cy, 0, self.ny - 1)

    def _delta(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        d = p - q
        if self.torus:
            d[:, 0] = _min_image(d[:, 0], self.window.width)
            d[:, 1] = _min_image(d[:, 1], self.window.height)
        return d

    def distances(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Row-wise distances between paired point arrays under this index's metric."""
        d = self._delta(np.asarray(q, float).reshape(-1, 2), np.asarray(p, float).reshape(-1, 2))
        return np.hypot(d[:, 0], d[:, 1])

    def _offsets(self, k: int, ring_only: bool = False) -> np.ndarray:
        r = np.arange(-k, k + 1)
        dx, dy = np.meshgrid(r, r, indexing="ij")
        dx, dy = dx.ravel(), dy.ravel()
        if ring_only:
            sel = np.maximum(np.abs(dx), np.abs(dy)) == k
            dx, dy = dx[sel], dy[sel]
        off = np.stack([dx, dy], axis=1)
        if self.torus:
            off = np.unique(np.stack([off[:, 0] % self.nx, off[:, 1] % self.ny], axis=1), axis=0)
        return off

    def _gather(self, qsel: np.ndarray, qcx: np.ndarray, qcy: np.ndarray, off: np.ndarray):
        """Candidate ``(query, point)`` index pairs from the offset cells around each query."""
        if len(qsel) == 0 or len(off) == 0 or len(self.points) == 0:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        tx = (qcx[:, None] + off[None, :, 0]).ravel()
        ty = (qcy[:, None] + off[None, :, 1]).ravel()
        qq = np.repeat(qsel, len(off))
        if self.torus:
            tx %= self.nx
            ty %= self.ny
        else:
            ok = (tx >= 0) & (tx < self.nx) & (ty >= 0) & (ty < self.ny)
            tx, ty, qq = tx[ok], ty[ok], qq[ok]
        cid = tx * self.ny + ty
        cnt = self.counts[cid]
        nz = cnt > 0
        cid, cnt, qq = cid[nz], cnt[nz], qq[nz]
        total = int(cnt.sum())
        if total == 0:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        first = np.repeat(self.starts[cid], cnt)
        within = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        return np.repeat(qq, cnt), self.order[first + within]

    def query_radius(self, queries, radii):
        """All ``(query, point, distance)`` triples with distance strictly below the query's radius.

        ``radii`` may be a scalar or one value per query; infinite radii
        return every point. Results are sorted by query then point index.
        """
        q = np.asarray(queries, dtype=float).reshape(-1, 2)
        r = np.broadcast_to(np.asarray(radii, dtype=float), (len(q),))
        if np.any(r < 0) or np.any(np.isnan(r)):
            raise ValueError("radii must be >= 0")
        qi_all, pj_all, d_all = [], [], []
        active = np.nonzero(r > 0)[0]
        if len(active) and len(self.points):
            qcx, qcy = self._cells(q[active])
            kmax = max(self.nx, self.ny)
            cmin = min(self.cell_x, self.cell_y)
            with np.errstate(invalid="ignore", over="ignore"):
                k = np.minimum(np.floor(r[active] / cmin) + 1, kmax)
            k = k.astype(np.int64)
            for kk in np.unique(k):
                sel = k == kk
                qi, pj = self._gather(active[sel], qcx[sel], qcy[sel], self._offsets(int(kk)))
                if len(qi) == 0:
                    continue
                d = self.distances(q[qi], self.points[pj])
                hit = d < r[qi]
                qi_all.append(qi[hit])
                pj_all.append(pj[hit])
                d_all.append(d[hit])
        if not qi_all:
            return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
        qi, pj, d = np.concatenate(qi_all), np.concatenate(pj_all), np.concatenate(d_all)
        idx = np.lexsort((pj, qi))
        return qi[idx], pj[idx], d[idx]

    def nearest_distances(self, queries) -> np.ndarray:
        """Distance from each query to its closest indexed point (``inf`` if the index is empty)."""
        q = np.asarray(queries, dtype=float).reshape(-1, 2)
        best = np.full(len(q), np.inf)
        if len(self.points) == 0 or len(q) == 0:
            return best
        qcx, qcy = self._cells(q)
        cmin = min(self.cell_x, self.cell_y)
        kstop = max(self.nx, self.ny) // 2 + 1 if self.torus else max(self.nx, self.ny)
        todo = np.arange(len(q))
        k = 0
        while len(todo) and k <= kstop:
            qi, pj = self._gather(todo, qcx[todo], qcy[todo], self._offsets(k, ring_only=True))
            if len(qi):
                np.minimum.at(best, qi, self.distances(q[qi], self.points[pj]))
            # anything in rings beyond k is at least k*cmin away
            todo = todo[best[todo] > k * cmin]
            k += 1
        return best


def nearest_distance(p, index: SpatialIndex) -> float:
    """Distance from ``p`` to the closest indexed point, ``inf`` for an empty index."""
    return float(index.nearest_distances(np.asarray(p, float).reshape(1, 2))[0])


def points_within(p, r: float, index: SpatialIndex) -> list[int]:
    """Identifiers of indexed points strictly closer than ``r`` to ``p``, ascending."""
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    _, pj, _ = index.query_radius(np.asarray(p, float).reshape(1, 2), r)
    return pj.tolist()
