"""Monte Carlo experiments over random targets and parameter sweeps.

Seeding: target draw ``k`` always uses the stream spawned from
``(master_seed, TARGET_STREAM, k)`` and follower ``i``'s channel draws use
``(master_seed, i)``, so every sweep point sees the same targets and the
same fading (common random numbers) and nothing depends on evaluation
order.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .bounds import monostatic_baseline
from .config import ScenarioConfig
from .geometry import TargetState, node_positions
from .sync_model import SyncPriors, compute_priors

logger = logging.getLogger(__name__)

TARGET_STREAM = 0x7A46
PERCENTILES = (5, 25, 50, 75, 95)


def draw_seed(master_seed: int, draw: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(TARGET_STREAM, draw))


def sample_target(cfg: ScenarioConfig, rng) -> TargetState:
    """Uniform position in the target box; uniform speed, isotropic heading."""
    rng = np.random.default_rng(rng)
    t = cfg.targets
    p = np.array([rng.uniform(*t.x), rng.uniform(*t.y), rng.uniform(*t.z)])
    if t.velocity_sampling == "isotropic":
        speed = rng.uniform(*t.speed)
        direction = rng.standard_normal(3)
        norm = np.linalg.norm(direction)
        while norm < 1e-12:
            direction = rng.standard_normal(3)
            norm = np.linalg.norm(direction)
        v = speed * direction / norm
    else:
        hi = t.speed[1]
        v = rng.uniform(-hi, hi, size=3)
    return TargetState(p, v)


def sample_targets(cfg: ScenarioConfig, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    n = cfg.targets.count if n is None else n
    p = np.empty((n, 3))
    v = np.empty((n, 3))
    for k in range(n):
        tgt = sample_target(cfg, draw_seed(cfg.run.seed, k))
        p[k], v[k] = tgt.p, tgt.v
    return p, v


@dataclass
class PointResult:
    """All draws of one sweep point.

    ``peb``/``veb`` are infinite for draws whose FIM is singular.  The
    ``range_error``/``range_rate_error`` arrays are filled only in
    monostatic mode.
    """

    coords: dict
    mode: str
    p: np.ndarray
    v: np.ndarray
    peb: np.ndarray
    veb: np.ndarray
    singular: np.ndarray
    condition_number: np.ndarray
    priors: list = field(default_factory=list)
    range_error: np.ndarray | None = None
    range_rate_error: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return len(self.peb)

    @property
    def outage_count(self) -> int:
        return int(self.singular.sum())

    def percentiles(self, values: np.ndarray) -> np.ndarray:
        finite = values[np.isfinite(values)]
        if finite.size == 0:
            return np.full(len(PERCENTILES), np.nan)
        return np.percentile(finite, PERCENTILES)

    @property
    def peb_percentiles(self) -> np.ndarray:
        return self.percentiles(self.peb)

    @property
    def veb_percentiles(self) -> np.ndarray:
        return self.percentiles(self.veb)


@dataclass
class SweepResult:
    axes: dict
    points: list[PointResult]

    def __getitem__(self, coords) -> PointResult:
        key = tuple(coords) if not isinstance(coords, dict) else tuple(coords[a] for a in self.axes)
        for pt in self.points:
            if tuple(pt.coords[a] for a in self.axes) == key:
                return pt
        raise KeyError(coords)


def effective_priors(cfg: ScenarioConfig, priors: list[SyncPriors]) -> list[SyncPriors]:
    """Apply ``run.prior_scale`` and the σ floors; the leader gets the floors."""
    run = cfg.run
    out = []
    for pr in priors:
        if pr.radar_id == 0:
            out.append(replace(pr, sigma_t=run.sigma_t_floor, sigma_f=run.sigma_f_floor))
        else:
            out.append(replace(
                pr,
                sigma_t=max(pr.sigma_t * run.prior_scale, run.sigma_t_floor),
                sigma_f=max(pr.sigma_f * run.prior_scale, run.sigma_f_floor),
            ))
    return out


def point_priors(cfg: ScenarioConfig) -> list[SyncPriors]:
    return compute_priors(cfg.nodes(), cfg.sync_link(), cfg.sync.realizations, cfg.run.seed)


def run_point(cfg: ScenarioConfig, overrides: dict | None = None, backend: str | None = None) -> PointResult:
    """Evaluate every target draw at one parameter point."""
    coords = dict(overrides or {})
    if coords:
        cfg = cfg.with_overrides(coords)
    mode = cfg.run.mode
    nodes = cfg.nodes()
    waveform, budget = cfg.waveform(), cfg.link_budget()
    p, v = sample_targets(cfg)

    priors: list[SyncPriors] = []
    use = np.ones(len(nodes), dtype=bool)
    kernel_priors = None
    if mode == "monostatic":
        use[1:] = False
    elif mode == "synced":
        priors = effective_priors(cfg, point_priors(cfg))
        for pr in priors:
            if not (math.isfinite(pr.sigma_t) and math.isfinite(pr.sigma_f)):
                logger.warning("radar %d excluded: sync link unusable", pr.radar_id)
                use[pr.radar_id] = False
        kernel_priors = [pr for pr, u in zip(priors, use) if u]

    pos = node_positions(nodes)[use]
    res = kernels.batch_bounds(pos, p, v, waveform, budget, kernel_priors, cfg.run.diagonal_fim, backend)
    out = PointResult(coords, mode, p, v, res.peb, res.veb, res.singular, res.condition_number, priors)
    if mode == "monostatic":
        rng_err = np.empty(len(p))
        rr_err = np.empty(len(p))
        for k in range(len(p)):
            base = monostatic_baseline(nodes[0], TargetState(p[k], v[k]), waveform, budget)
            rng_err[k], rr_err[k] = base.range_error, base.range_rate_error
        out.range_error, out.range_rate_error = rng_err, rr_err
    return out


def sweep_points(cfg: ScenarioConfig) -> list[dict]:
    axes = cfg.sweep_axes
    for name in axes:
        cfg.get(name)  # raises ConfigurationError for unknown names
    names = list(axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*axes.values())]


def run_sweep(cfg: ScenarioConfig, backend: str | None = None) -> SweepResult:
    """Cartesian product of the sweep axes, one ``run_point`` each."""
    points = sweep_points(cfg)
    results = []
    for coords in points:
        logger.info("sweep point %s", coords or "(base)")
        results.append(run_point(cfg, coords, backend))
    return SweepResult(cfg.sweep_axes, results)
