"""Monte Carlo estimates of percolation probabilities on a finite window.

"Percolation" of the origin's component is approximated by reach: a trial
succeeds when the component of the node conditioned at the origin contains a
node farther than ``R`` from it. Every trial draws from its own streams keyed
by ``(master_seed, trial_index)`` so results do not depend on scheduling.

Density sweeps sample the legitimate process once per trial at the largest
density and thin it (each point carries a uniform mark ``u`` and is kept at
density ``lam`` iff ``u < lam / lam_max``). Node sets are then nested across
the sweep and the graph at a lower density is a subgraph of the one above it.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelParams, GainModel, out_radius, rho_max
from .geometry import Window, default_eaves_padding, sample_poisson, trial_rng
from .graph import MODES, NetworkRealization, build_isgraph, component_members, condition_origin

Z95 = 1.959963984540054

LEGIT_STREAM = 0
EAVES_STREAM = 1


@dataclass(frozen=True)
class TrialConfig:
    lambda_l: float
    lambda_e: float
    params: ChannelParams
    model: GainModel
    L: float = 10.0
    R: float | None = None
    trials: int = 400
    master_seed: int = 0
    mode: str = "weak"
    eaves_padding: float | None = None
    torus: bool = False

    def __post_init__(self):
        if self.R is None:
            object.__setattr__(self, "R", 0.4 * self.L)
        if self.eaves_padding is None:
            pad = 0.0 if self.torus else default_eaves_padding(self.lambda_e)
            object.__setattr__(self, "eaves_padding", pad)
        if self.lambda_l < 0 or self.lambda_e < 0:
            raise ValueError("densities must be >= 0")
        if not 0 < self.R <= self.L:
            raise ValueError(f"need 0 < R <= L, got R={self.R}, L={self.L}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @property
    def window(self) -> Window:
        return Window.centered(self.L)

    def replace(self, **kw) -> TrialConfig:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return TrialConfig(**d)


@dataclass(frozen=True)
class PercolationEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    trials: int
    successes: int

    @classmethod
    def from_counts(cls, successes: int, trials: int) -> PercolationEstimate:
        lo, hi = wilson_interval(successes, trials)
        return cls(successes / trials, lo, hi, trials, successes)


@dataclass
class SweepResult:
    """Estimates along a grid of ``parameter`` values (``lambda_l`` or ``rho``)."""

    parameter: str
    values: list[float]
    estimates: list[PercolationEstimate]
    mode: str
    crossings: dict[float, float | None] = field(default_factory=dict)
    truncated: bool = False

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")

    @property
    def points(self) -> list[tuple[float, PercolationEstimate]]:
        return list(zip(self.values, self.estimates))

    @property
    def p_hat(self) -> np.ndarray:
        return np.array([e.p_hat for e in self.estimates])


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def sample_trial(config: TrialConfig, trial_index: int, lambda_max: float | None = None,
                 salt: int = 0) -> tuple[NetworkRealization, np.ndarray]:
    """Origin-conditioned realization for one trial and the thinning marks of its legit nodes.

    The origin node carries mark 0 so it survives every thinning.
    """
    lam = config.lambda_l if lambda_max is None else lambda_max
    rng_l = trial_rng(config.master_seed, trial_index, 2 * salt + LEGIT_STREAM)
    rng_e = trial_rng(config.master_seed, trial_index, 2 * salt + EAVES_STREAM)
    window = config.window
    legit = sample_poisson(lam, window, rng_l)
    marks = rng_l.random(len(legit))
    eaves = sample_poisson(config.lambda_e, window.inflate(config.eaves_padding), rng_e)
    real = condition_origin(NetworkRealization(legit, eaves, window, torus=config.torus))
    return real, np.concatenate(([0.0], marks))


def _reach(graph, nodes_norm, mode, R) -> bool:
    members = component_members(graph, 0, mode)
    return bool(nodes_norm[members].max() > R)


def trial_outcomes(config: TrialConfig, trial_index: int, lambda_grid: Sequence[float] | None = None,
                   rho_grid: Sequence[float] | None = None, modes: Sequence[str] | None = None,
                   salt: int = 0) -> np.ndarray:
    """Success flags of one trial, shape ``(len(lambda_grid), len(rho_grid), len(modes))``.

    All grid points share the trial's realization (thinned per density), so
    the outcomes are coupled exactly across density, threshold and mode.
    """
    lambdas = [config.lambda_l] if lambda_grid is None else list(lambda_grid)
    rhos = [config.params.rho] if rho_grid is None else list(rho_grid)
    modes = [config.mode] if modes is None else list(modes)
    lam_max = max(lambdas)
    out = np.zeros((len(lambdas), len(rhos), len(modes)), dtype=bool)
    if lam_max <= 0:
        return out
    real, marks = sample_trial(config, trial_index, lam_max, salt)
    rho_min = min(rhos)
    base = build_isgraph(real, config.params.with_rho(rho_min), config.model)
    nodes = base.nodes
    norm = np.hypot(nodes[:, 0], nodes[:, 1])
    if norm.max() <= config.R:
        return out
    for b, rho in enumerate(rhos):
        params = config.params.with_rho(rho)
        if rho >= rho_max(params, config.model):
            continue
        g_rho = base if rho == rho_min else base.restrict(radii=out_radius(params, config.model, base.rho_e))
        for a, lam in enumerate(lambdas):
            if lam <= 0:
                continue
            g = g_rho if lam == lam_max else g_rho.restrict(keep=marks < lam / lam_max)
            for c, mode in enumerate(modes):
                out[a, b, c] = _reach(g, norm, mode, config.R)
    return out


def run_trial(config: TrialConfig, trial_index: int) -> bool:
    """Whether the origin's ``config.mode`` component reaches beyond ``config.R``."""
    return bool(trial_outcomes(config, trial_index)[0, 0, 0])


def _run_chunk(args):
    config, indices, lambdas, rhos, modes, salt = args
    return np.stack([trial_outcomes(config, i, lambdas, rhos, modes, salt) for i in indices])


def outcome_tensor(config: TrialConfig, lambda_grid=None, rho_grid=None, modes=None, workers: int = 1,
                   chunk: int = 25, salt: int = 0, on_chunk=None) -> np.ndarray:
    """Outcomes for trials ``0..config.trials-1``, shape ``(trials, n_lambda, n_rho, n_mode)``.

    ``on_chunk(done_array)`` is called with the outcomes gathered so far after
    each chunk, so callers can flush partial results.
    """
    chunks = [list(range(s, min(s + chunk, config.trials))) for s in range(0, config.trials, chunk)]
    jobs = [(config, c, lambda_grid, rho_grid, modes, salt) for c in chunks]
    parts = []
    if workers <= 1:
        for job in jobs:
            parts.append(_run_chunk(job))
            if on_chunk is not None:
                on_chunk(np.concatenate(parts))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_run_chunk, jobs):
                parts.append(res)
                if on_chunk is not None:
                    on_chunk(np.concatenate(parts))
    return np.concatenate(parts)


def estimate_p_inf(config: TrialConfig, workers: int = 1) -> PercolationEstimate:
    flags = outcome_tensor(config, workers=workers)[:, 0, 0, 0]
    return PercolationEstimate.from_counts(int(flags.sum()), len(flags))


def estimates_from_counts(counts: np.ndarray, trials: int) -> list[PercolationEstimate]:
    return [PercolationEstimate.from_counts(int(c), trials) for c in counts]


DEFAULT_CROSSINGS = (0.05, 0.5, 0.95)


def sweep_lambda_l_modes(base: TrialConfig, lambda_grid: Sequence[float], modes: Sequence[str],
                         crn: bool = True, workers: int = 1,
                         crossings: Sequence[float] = DEFAULT_CROSSINGS) -> dict[str, SweepResult]:
    """One density sweep per mode, all modes evaluated on the same trials."""
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid must be non-empty")
    if crn:
        t = outcome_tensor(base, grid, None, modes, workers)[:, :, 0, :]
    else:
        # independent realizations per grid point, keyed by a per-point salt
        t = np.stack([outcome_tensor(base.replace(lambda_l=lam), [lam], None, modes, workers, salt=k + 1)
                      [:, 0, 0, :] for k, lam in enumerate(grid)], axis=1)
    return {
        m: _sweep("lambda_l", grid, t[:, :, c].sum(axis=0), base.trials, m, crossings)
        for c, m in enumerate(modes)
    }


def _sweep(parameter, grid, counts, trials, mode, crossings, truncated=False):
    res = SweepResult(parameter, list(grid), estimates_from_counts(counts, trials), mode,
                      truncated=truncated)
    if parameter == "lambda_l":
        res.crossings = {c: extract_critical_density(res, c) for c in crossings}
    return res


def sweep_lambda_l(base: TrialConfig, lambda_grid: Sequence[float], crn: bool = True,
                   workers: int = 1) -> SweepResult:
    """Percolation estimates for ``base.mode`` along an increasing density grid."""
    return sweep_lambda_l_modes(base, lambda_grid, [base.mode], crn, workers)[base.mode]


def sweep_rho(base: TrialConfig, rho_grid: Sequence[float], workers: int = 1) -> SweepResult:
    """Estimates for ``base.mode`` along a threshold grid, on shared realizations."""
    grid = [float(v) for v in rho_grid]
    if not grid or min(grid) < 0:
        raise ValueError("rho grid must be non-empty and non-negative")
    t = outcome_tensor(base, None, grid, [base.mode], workers)[:, 0, :, 0]
    return _sweep("rho", grid, t.sum(axis=0), base.trials, base.mode, ())


def extract_critical_density(sweep: SweepResult, crossing: float = 0.5) -> float | None:
    """Linear interpolation of the first upward crossing of ``crossing`` by ``p_hat``."""
    if not 0 < crossing < 1:
        raise ValueError("crossing must lie in (0, 1)")
    x = sweep.values
    p = sweep.p_hat
    for k in range(len(x)):
        if p[k] >= crossing:
            if k == 0:
                return None if p[0] > crossing else float(x[0])
            x0, x1, p0, p1 = x[k - 1], x[k], p[k - 1], p[k]
            return float(x0 + (crossing - p0) * (x1 - x0) / (p1 - p0))
    return None


def proxy_metadata(config: TrialConfig) -> dict:
    return {
        "proxy": "origin component contains a node farther than R from the origin",
        "window": f"[-L, L]^2 with L={config.L}",
        "R": config.R,
        "eaves_padding": config.eaves_padding,
        "bias": "reach probability upper-bounds p_inf and converges to it from above as L, R grow",
    }


def estimate_dict(e: PercolationEstimate) -> dict:
    return asdict(e)
