"""
Monte Carlo Service for fptlie

Euler-Maruyama oracle for first-passage times of dX = mu(X)dt + dW.

Features:
- Block-structured counter-based streams: block k always draws from Philox(seed, k),
  so results do not depend on the worker count
- Brownian-bridge crossing correction between grid points
- Drift lookup table (cubic Hermite with the Ricatti slope mu' = RHS - mu^2)
- Censoring at the horizon and domain-exit accounting for F3/F4
- Reflected Gaussian KDE with standard errors, empirical CDF, window probabilities
- Functional estimates E[h(T)] bracketed by the censored mass
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicHermiteSpline

from ..errors import DomainError, InsufficientSamplesError
from ..logs import get_logger
from ..models import Boundary, DensityCurve, Direction, DriftSpec, FptSampleSet, FunctionalEstimate, SdeConfig
from . import families
from .export import config_digest

logger = get_logger("mc")

# Minimum number of crossings for a density estimate
MIN_CROSSINGS = 100
# Points in the drift lookup table
TABLE_POINTS = 2001
# Half-width of the table around start and boundary, in units of sqrt(horizon)
TABLE_SPREAD = 8.0


class DriftTable:
    """Cubic Hermite interpolant of mu on [x_lo, x_hi]; exact drift (or linear extrapolation) outside."""

    def __init__(self, spec: DriftSpec, x_lo: float, x_hi: float, n: int = TABLE_POINTS):
        lo, hi = spec.domain
        if not (lo < x_lo < x_hi < hi):
            raise DomainError(f"drift table [{x_lo:g}, {x_hi:g}] not inside the domain ({lo:g}, {hi:g})")
        self.spec = spec
        self.x_lo, self.x_hi = x_lo, x_hi
        xs = np.linspace(x_lo, x_hi, n)
        mu = np.asarray(families.drift_mu(spec, xs), dtype=float)
        slope = np.asarray(families.ricatti_rhs(spec, xs), dtype=float) - mu * mu
        self.spline = CubicHermiteSpline(xs, mu, slope)
        self.edges = ((x_lo, mu[0], slope[0]), (x_hi, mu[-1], slope[-1]))

    def _outside(self, x: np.ndarray) -> np.ndarray:
        out = np.full_like(x, np.nan)
        lo, hi = self.spec.domain
        inside = (x > lo) & (x < hi)
        if np.any(inside):
            with np.errstate(all="ignore"):
                out[inside] = families.drift_mu(self.spec, x[inside])
        bad = ~np.isfinite(out)
        if np.any(bad):
            low = x[bad] < self.x_lo
            edge_lo, edge_hi = self.edges
            ref = np.where(low, edge_lo[0], edge_hi[0])
            mu = np.where(low, edge_lo[1], edge_hi[1])
            slope = np.where(low, edge_lo[2], edge_hi[2])
            out[bad] = mu + slope * (x[bad] - ref)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.spline(np.clip(x, self.x_lo, self.x_hi))
        outside = (x < self.x_lo) | (x > self.x_hi)
        if np.any(outside):
            out[outside] = self._outside(x[outside])
        return out


def drift_table(spec: DriftSpec, x_lo: float, x_hi: float, n: int = TABLE_POINTS) -> DriftTable:
    return DriftTable(spec, x_lo, x_hi, n)


def _table_range(spec: DriftSpec, cfg: SdeConfig, b: Boundary) -> Tuple[float, float]:
    ts = np.linspace(0.0, cfg.horizon, 64)
    levels = np.concatenate([np.atleast_1d(b(ts)), [cfg.x0]])
    spread = TABLE_SPREAD * math.sqrt(cfg.horizon) + 1.0
    lo, hi = spec.domain
    x_lo = max(float(levels.min()) - spread, lo + 1e-6 * max(1.0, abs(lo)) if math.isfinite(lo) else -math.inf)
    x_hi = min(float(levels.max()) + spread, hi - 1e-6 * max(1.0, abs(hi)) if math.isfinite(hi) else math.inf)
    return x_lo, x_hi


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _simulate_block(block: int, n: int, cfg: SdeConfig, drift: Callable, b: Boundary, sign: int,
                    domain: Tuple[float, float]) -> Tuple[np.ndarray, int, int]:
    """Crossing times, censored count and domain-exit count of one block of paths."""
    rng = _block_rng(cfg.seed, block)
    dt = cfg.dt
    n_steps = int(math.ceil(cfg.horizon / dt - 1e-9))
    lo, hi = domain

    x = np.full(n, cfg.x0)
    dist = np.full(n, -sign * (cfg.x0 - float(b(0.0))))
    alive = np.arange(n)
    times: List[np.ndarray] = []
    exits = 0

    for step in range(n_steps):
        if alive.size == 0:
            break
        t0 = step * dt
        t1 = min(t0 + dt, cfg.horizon)
        h = t1 - t0
        z = rng.standard_normal(alive.size)
        u = rng.random(alive.size) if cfg.bridge_correction else None

        xs = x[alive]
        x1 = xs + drift(xs) * h + math.sqrt(h) * z
        d0 = dist[alive]
        d1 = -sign * (x1 - float(b(t1)))

        hit = d1 <= 0
        crossed_at = np.where(hit, t0 + h * d0 / np.where(hit, d0 - d1, 1.0), np.nan)
        if u is not None:
            with np.errstate(over="ignore"):
                bridge = ~hit & (u < np.exp(-2.0 * d0 * d1 / h))
            crossed_at = np.where(bridge, t0 + 0.5 * h, crossed_at)
            hit = hit | bridge

        left = ~hit & ((x1 <= lo) | (x1 >= hi))
        exits += int(left.sum())
        if np.any(hit):
            times.append(crossed_at[hit])

        keep = ~(hit | left)
        x[alive] = x1
        dist[alive] = d1
        alive = alive[keep]

    crossed = np.concatenate(times) if times else np.empty(0)
    return crossed, int(alive.size), exits


def simulate_fpt(cfg: SdeConfig, b: Boundary, direction: Optional[Direction] = None) -> FptSampleSet:
    """Simulate cfg.n_paths paths and return the crossing times of b (sorted) with censoring counts."""
    b0 = float(b(0.0))
    if cfg.x0 == b0:
        raise DomainError("start point lies on the boundary")
    if direction is None:
        direction = Direction.DOWN if cfg.x0 > b0 else Direction.UP
    if (direction == Direction.UP) != (cfg.x0 < b0):
        raise DomainError(f"start {cfg.x0:g} is already past the boundary for a {direction.value}-crossing")

    if isinstance(cfg.drift, DriftSpec):
        spec = cfg.drift
        domain = spec.domain
        x_lo, x_hi = _table_range(spec, cfg, b)
        drift: Union[DriftTable, Callable] = drift_table(spec, x_lo, x_hi)
        if not (domain[0] < cfg.x0 < domain[1]):
            raise DomainError(f"x0={cfg.x0:g} outside the domain {domain}")
    else:
        drift = cfg.drift
        domain = (-math.inf, math.inf)

    sizes = [cfg.block_size] * (cfg.n_paths // cfg.block_size)
    if cfg.n_paths % cfg.block_size:
        sizes.append(cfg.n_paths % cfg.block_size)

    logger.info(f"simulate_fpt: {cfg.n_paths} paths in {len(sizes)} blocks, dt={cfg.dt:g}, "
                f"horizon={cfg.horizon:g}, bridge={cfg.bridge_correction}, workers={cfg.workers}")

    def run(args):
        block, n = args
        return _simulate_block(block, n, cfg, drift, b, direction.sign, domain)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, enumerate(sizes)))
    else:
        results = [run(item) for item in enumerate(sizes)]

    crossing = np.sort(np.concatenate([r[0] for r in results])) if results else np.empty(0)
    n_censored = sum(r[1] for r in results)
    n_exit = sum(r[2] for r in results)
    if n_exit:
        logger.warning(f"simulate_fpt: {n_exit} path(s) left the domain {domain}")

    digest = config_digest({**cfg.digest_payload(), "boundary": b.to_config(), "direction": direction.value})
    samples = FptSampleSet(crossing_times=crossing, n_paths=cfg.n_paths, n_censored=n_censored,
                           n_domain_exit=n_exit, direction=direction, boundary=b, horizon=cfg.horizon,
                           x0=cfg.x0, config_digest=digest)
    logger.info(f"simulate_fpt: {samples.n_crossed} crossed, censored fraction {samples.censored_fraction:.4f}")
    return samples


# Estimators

def silverman_bandwidth(times: np.ndarray) -> float:
    """0.9 min(std, IQR/1.34) n^{-1/5}."""
    q75, q25 = np.percentile(times, [75, 25])
    spread = min(float(np.std(times, ddof=1)), float(q75 - q25) / 1.34)
    if not spread > 0:
        spread = float(np.std(times, ddof=1)) or 1e-3
    return 0.9 * spread * times.size ** -0.2


def empirical_density(samples: FptSampleSet, t_grid, bandwidth: Optional[float] = None) -> DensityCurve:
    """
    Gaussian KDE of the crossing times, reflected at t = 0 and normalized by the total
    number of paths (so it integrates to the crossed fraction). meta["stderr"] holds
    the pointwise standard error.
    """
    times = samples.crossing_times
    if times.size < MIN_CROSSINGS:
        raise InsufficientSamplesError(f"only {times.size} crossings; at least {MIN_CROSSINGS} needed")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    h = bandwidth or silverman_bandwidth(times)
    n = samples.n_paths
    norm = 1.0 / (h * math.sqrt(2.0 * math.pi))

    rho = np.empty_like(t)
    stderr = np.empty_like(t)
    for start in range(0, t.size, 16):
        chunk = t[start:start + 16, None]
        k = norm * (np.exp(-0.5 * ((chunk - times) / h) ** 2) + np.exp(-0.5 * ((chunk + times) / h) ** 2))
        first = k.sum(axis=1) / n
        second = (k * k).sum(axis=1) / n
        rho[start:start + 16] = first
        stderr[start:start + 16] = np.sqrt(np.maximum(second - first * first, 0.0) / n)
    return DensityCurve(t_grid=t, rho=rho, x0=samples.x0, boundary=samples.boundary,
                        direction=samples.direction,
                        meta={"stderr": stderr, "bandwidth": h, "n_paths": n, "n_crossed": int(times.size)})


def empirical_cdf(samples: FptSampleSet, t) -> Tuple[np.ndarray, np.ndarray]:
    """P(T <= t) and its binomial standard error."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    p = np.searchsorted(samples.crossing_times, t, side="right") / samples.n_paths
    return p, np.sqrt(p * (1.0 - p) / samples.n_paths)


def window_probability(samples: FptSampleSet, t1: float, t2: float) -> Tuple[float, float]:
    """P(t1 < T <= t2) and its binomial standard error."""
    if not t1 < t2:
        raise DomainError("window needs t1 < t2")
    times = samples.crossing_times
    count = np.searchsorted(times, t2, side="right") - np.searchsorted(times, t1, side="right")
    p = count / samples.n_paths
    return float(p), float(math.sqrt(p * (1.0 - p) / samples.n_paths))


def functional_estimate(samples: FptSampleSet, fn: Callable) -> FunctionalEstimate:
    """E[fn(T)] for a positive decreasing fn; censored paths lie between 0 and fn(horizon)."""
    n = samples.n_paths
    values = np.zeros(n)
    values[:samples.n_crossed] = np.asarray(fn(samples.crossing_times), dtype=float)
    lower = float(values.mean())
    unfinished = samples.n_censored + samples.n_domain_exit
    upper = lower + unfinished * float(fn(samples.horizon)) / n
    stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return FunctionalEstimate(lower=lower, upper=upper, stderr=stderr, n_paths=n)


def laplace_estimate(samples: FptSampleSet, lam: float) -> FunctionalEstimate:
    return functional_estimate(samples, lambda t: np.exp(-lam * np.asarray(t)))


# Comparisons against a reference density

def window_z_scores(samples: FptSampleSet, curve: DensityCurve, n_windows: int = 8) -> List[Dict[str, float]]:
    """MC window probabilities against trapezoid integrals of the reference density."""
    t = curve.t_grid
    cuts = np.unique(np.linspace(0, t.size - 1, n_windows + 1).round().astype(int))
    rows = []
    for i0, i1 in zip(cuts[:-1], cuts[1:]):
        t1, t2 = float(t[i0]), float(t[i1])
        p_ref = float(trapezoid(curve.rho[i0:i1 + 1], t[i0:i1 + 1]))
        p_mc, se = window_probability(samples, t1, t2)
        z = (p_mc - p_ref) / max(se, 1.0 / samples.n_paths)
        rows.append({"t1": t1, "t2": t2, "p_ref": p_ref, "p_mc": p_mc, "stderr": se, "z": z})
    return rows


def side_by_side(curve: DensityCurve, samples: FptSampleSet) -> Dict[str, np.ndarray]:
    """Columns t, rho, rho_mc, stderr, z for the reference curve and the KDE on the same grid."""
    kde = empirical_density(samples, curve.t_grid)
    se = kde.meta["stderr"]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (kde.rho - curve.rho) / se, 0.0)
    return {"t": curve.t_grid, "rho": curve.rho, "rho_mc": kde.rho, "stderr": se, "z": z}
