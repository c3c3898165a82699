"""Mechanism builders: coin, exponential kernel, iterative entropy-maximizing
mechanism, planar noise samplers, and truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import Euclidean, SquaredEuclidean
from .metrics import distance_matrix, q_avg
from .model import DiscreteMechanism, NoiseSampler, PoiSet, Prior
from .remap import WeiszfeldConfig, geometric_median, optimal_remap, weighted_distance_sum

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# constant-output optimum and the coin mechanism

def optimal_constant_output(
    prior: Prior, dq, cfg: WeiszfeldConfig = WeiszfeldConfig()
) -> tuple[np.ndarray, float]:
    """Best single report z* and its average loss Q*.

    z* is the geometric median of the prior under Euclidean loss and the
    prior mean under squared-Euclidean loss.
    """
    coords = prior.poi.coords
    if isinstance(dq, SquaredEuclidean):
        z_star = (prior.pmf[:, None] * coords).sum(axis=0)
        q_star = float(prior.pmf @ ((coords - z_star) ** 2).sum(axis=1))
    elif isinstance(dq, Euclidean):
        z_star = geometric_median(coords, prior.pmf, cfg)
        q_star = weighted_distance_sum(z_star, coords, prior.pmf)
    else:
        raise ValueError("constant-output optimum needs a geometric loss")
    return z_star, q_star


@dataclass(frozen=True)
class CoinParams:
    q_target: float
    alpha: float
    z_star: np.ndarray
    q_star: float


def coin_params(
    prior: Prior, dq, q_target: float, cfg: WeiszfeldConfig = WeiszfeldConfig()
) -> CoinParams:
    z_star, q_star = optimal_constant_output(prior, dq, cfg)
    if not 0.0 <= q_target <= q_star:
        raise ValueError(
            f"coin target loss {q_target} outside [0, Q*={q_star}]"
        )
    alpha = 1.0 - q_target / q_star if q_star > 0 else 0.0
    return CoinParams(q_target, alpha, z_star, q_star)


def build_coin(
    prior: Prior, dq, q_target: float, cfg: WeiszfeldConfig = WeiszfeldConfig()
) -> DiscreteMechanism:
    """Report the true location w.p. alpha, else the fixed point z*."""
    p = coin_params(prior, dq, q_target, cfg)
    coords = prior.poi.coords
    n = prior.poi.n
    hit = np.flatnonzero((coords == p.z_star).all(axis=1))
    if len(hit):
        outputs = coords
        star = int(hit[0])
    else:
        outputs = np.vstack([coords, p.z_star[None, :]])
        star = n
    matrix = np.zeros((n, len(outputs)))
    matrix[np.arange(n), np.arange(n)] = p.alpha
    matrix[:, star] += 1.0 - p.alpha
    return DiscreteMechanism(prior.poi, outputs, matrix)


# ---------------------------------------------------------------------------
# exponential kernel

def build_exponential(
    poi: PoiSet, outputs: np.ndarray | None, dq, b: float
) -> DiscreteMechanism:
    """Row-normalized kernel f[z|x] proportional to e^{-b d_Q(x, z)}."""
    if b < 0:
        raise ValueError("rate b must be non-negative")
    if outputs is None:
        outputs = poi.coords
    probe = DiscreteMechanism(
        poi, outputs, np.full((poi.n, len(outputs)), 1.0 / len(outputs))
    )
    d = distance_matrix(dq, probe)
    kernel = np.exp(-b * (d - d.min(axis=1, keepdims=True)))
    kernel /= kernel.sum(axis=1, keepdims=True)
    return DiscreteMechanism(poi, outputs, kernel, output_tags=probe.output_tags)


# ---------------------------------------------------------------------------
# iterative exponential-posterior mechanism (rate-distortion style)

@dataclass(frozen=True)
class BAParams:
    b: float  # 1/km
    convergence_threshold: float = 1e-9  # max absolute matrix change
    max_iterations: int = 100_000

    def __post_init__(self):
        if self.b < 0 or self.convergence_threshold <= 0:
            raise ValueError("invalid iteration parameters")


@dataclass
class BARun:
    mechanism: DiscreteMechanism  # pre-remap fixed point
    iterations: int
    lagrangian: list[float]  # I(X;Z) [bits] + b * Q_avg / ln 2 per iteration


class BAConvergenceError(RuntimeError):
    def __init__(self, message, last: DiscreteMechanism):
        super().__init__(message)
        self.last = last


def ba_fixed_point(
    prior: Prior,
    outputs: np.ndarray | None,
    dq,
    params: BAParams,
    init: np.ndarray | None = None,
) -> BARun:
    """Alternate marginal / exponential-tilt updates until the matrix is
    stationary.

    ``init`` allows warm-starting from a previously converged matrix.
    """
    poi = prior.poi
    if outputs is None:
        outputs = poi.coords
    m = len(outputs)
    probe = DiscreteMechanism(poi, outputs, np.full((poi.n, m), 1.0 / m))
    d = distance_matrix(dq, probe)
    # the per-row shift cancels in step 3's normalization but avoids underflow
    kernel = np.exp(-params.b * (d - d.min(axis=1, keepdims=True)))
    f = np.full((poi.n, m), 1.0 / m) if init is None else np.array(init, float)

    def lagrangian_of(f, pz):
        # I(X;Z) + b Q_avg, in bits
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(f > 0, f / np.maximum(pz[None, :], 1e-300), 1.0)
            mi = float((prior.pmf[:, None] * f * np.log2(ratio)).sum())
        qa = float(prior.pmf @ (f * d).sum(axis=1))
        return mi + params.b * qa / LN2

    lagrangian = []
    for it in range(params.max_iterations):
        pz = prior.pmf @ f
        lagrangian.append(lagrangian_of(f, pz))
        new = pz[None, :] * kernel
        new = new / new.sum(axis=1, keepdims=True)
        # outputs with pz == 0 stay at zero probability, which the
        # normalization above already guarantees
        delta = np.abs(new - f).max()
        f = new
        if delta < params.convergence_threshold:
            lagrangian.append(lagrangian_of(f, prior.pmf @ f))
            mech = DiscreteMechanism(poi, outputs, f, output_tags=probe.output_tags)
            return BARun(mech, it + 1, lagrangian)
    raise BAConvergenceError(
        f"no fixed point in {params.max_iterations} iterations",
        DiscreteMechanism(poi, outputs, f),
    )


def build_ba(
    prior: Prior,
    outputs: np.ndarray | None,
    dq,
    params: BAParams,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> DiscreteMechanism:
    """Converged entropy-maximizing mechanism followed by the optimal remap."""
    run = ba_fixed_point(prior, outputs, dq, params)
    return optimal_remap(run.mechanism, prior, dq, cfg)


def tune_ba_b(
    prior: Prior,
    outputs: np.ndarray | None,
    dq,
    q_target: float,
    bracket: tuple[float, float],
    params: BAParams = BAParams(b=1.0),
    rel_tol: float = 0.01,
    max_bisections: int = 60,
) -> BAParams:
    """Bisect the rate b so the converged mechanism hits a target average loss.

    The loss is monotone decreasing in b; targets outside the bracket's
    attainable range are rejected.
    """
    b_lo, b_hi = bracket

    def loss(b):
        run = ba_fixed_point(prior, outputs, dq,
                             BAParams(b, params.convergence_threshold,
                                      params.max_iterations))
        return q_avg(run.mechanism, prior, dq)

    q_lo, q_hi = loss(b_lo), loss(b_hi)
    if not q_hi - 1e-12 <= q_target <= q_lo + 1e-12:
        raise ValueError(
            f"target {q_target} outside attainable range [{q_hi}, {q_lo}]"
        )
    for _ in range(max_bisections):
        if abs(q_lo - q_target) <= rel_tol * max(q_target, 1e-12):
            return BAParams(b_lo, params.convergence_threshold, params.max_iterations)
        if abs(q_hi - q_target) <= rel_tol * max(q_target, 1e-12):
            return BAParams(b_hi, params.convergence_threshold, params.max_iterations)
        mid = 0.5 * (b_lo + b_hi)
        q_mid = loss(mid)
        if q_mid > q_target:
            b_lo, q_lo = mid, q_mid
        else:
            b_hi, q_hi = mid, q_mid
    return BAParams(0.5 * (b_lo + b_hi), params.convergence_threshold,
                    params.max_iterations)


# ---------------------------------------------------------------------------
# Lambert W, branch -1

def lambert_w_m1(v):
    """W_{-1}(v) for v in [-1/e, 0): the w <= -1 solving w e^w = v.

    Asymptotic initial guess refined by Halley iterations; the residual
    |w e^w - v| is driven below 1e-12 across the domain. Accepts scalars or
    arrays.
    """
    v_arr = np.asarray(v, float)
    scalar = v_arr.ndim == 0
    x = np.atleast_1d(v_arr).astype(float)
    if (x < -1.0 / math.e - 1e-15).any() or (x >= 0).any():
        raise ValueError("argument outside [-1/e, 0)")

    w = np.empty_like(x)
    # near the branch point: series in s = sqrt(2(1 + e v))
    s = np.sqrt(np.maximum(2.0 * (1.0 + math.e * x), 0.0))
    near = s < 0.5
    w[near] = -1.0 - s[near] - s[near] ** 2 / 3.0 - 11.0 * s[near] ** 3 / 72.0
    # elsewhere: w ~ log(-v) - log(-log(-v))
    far = ~near
    l1 = np.log(-x[far])
    w[far] = l1 - np.log(-l1)

    for _ in range(80):
        ew = np.exp(w)
        r = w * ew - x
        if np.abs(r).max() <= 1e-13:
            break
        with np.errstate(all="ignore"):
            denom = ew * (w + 1.0) - (w + 2.0) * r / (2.0 * w + 2.0)
            step = np.where(np.abs(r) > 1e-300, r / denom, 0.0)
        w = w - np.nan_to_num(step)
    w = np.where(w > -1.0, -1.0, w)  # clip series overshoot at the branch point
    return float(w[0]) if scalar else w.reshape(v_arr.shape)


# ---------------------------------------------------------------------------
# planar noise samplers

class RadialNoiseSampler(NoiseSampler):
    """Isotropic planar noise: uniform angle, radius from a 1-D law."""

    support_radius = np.inf

    def draw_radii(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def density_profile(self, r):
        """Planar density f(z|x) at displacement radius r."""
        raise NotImplementedError

    def radial_cdf(self, r):
        """P(||z - x|| <= r); used to renormalize truncated densities."""
        raise NotImplementedError

    def draw(self, x, rng):
        r = float(self.draw_radii(rng, 1)[0])
        theta = rng.uniform(0.0, 2.0 * math.pi)
        return np.asarray(x, float) + r * np.array([math.cos(theta), math.sin(theta)])

    def density(self, z, x):
        r = float(np.linalg.norm(np.asarray(z, float) - np.asarray(x, float)))
        return float(self.density_profile(r))

    def densities(self, z, xs):
        r = np.linalg.norm(np.asarray(xs, float) - np.asarray(z, float), axis=1)
        return np.asarray(self.density_profile(r), float)


class PlanarLaplaceSampler(RadialNoiseSampler):
    """Polar Laplace noise with density proportional to e^{-eps ||z - x||}.

    Radius inversion uses the -1 branch of the Lambert W function; the mean
    displacement is 2/eps and the mechanism is eps-geo-indistinguishable.
    """

    def __init__(self, epsilon: float):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.epsilon = epsilon

    def draw_radii(self, rng, size):
        p = rng.uniform(0.0, 1.0, size)
        return -(1.0 / self.epsilon) * (lambert_w_m1((p - 1.0) / math.e) + 1.0)

    def density_profile(self, r):
        e = self.epsilon
        return e * e / (2.0 * math.pi) * np.exp(-e * np.asarray(r, float))

    def radial_cdf(self, r):
        er = self.epsilon * np.asarray(r, float)
        return 1.0 - (1.0 + er) * np.exp(-er)

    @property
    def analytic_gi(self) -> float:
        """Geo-indistinguishability level 1/epsilon, known in closed form."""
        return 1.0 / self.epsilon


class GaussianSampler(RadialNoiseSampler):
    """Isotropic bivariate Gaussian noise, parameterized by mean displacement.

    The radius is Rayleigh with scale sigma = mean_radius / sqrt(pi/2).
    """

    def __init__(self, mean_radius: float):
        if mean_radius <= 0:
            raise ValueError("mean radius must be positive")
        self.mean_radius = mean_radius
        self.sigma = mean_radius / math.sqrt(math.pi / 2.0)

    def draw_radii(self, rng, size):
        return rng.rayleigh(self.sigma, size)

    def density_profile(self, r):
        s2 = self.sigma**2
        return np.exp(-np.asarray(r, float) ** 2 / (2.0 * s2)) / (2.0 * math.pi * s2)

    def radial_cdf(self, r):
        return 1.0 - np.exp(-np.asarray(r, float) ** 2 / (2.0 * self.sigma**2))


class CircularSampler(RadialNoiseSampler):
    """Uniform noise on a disk of radius R (linear radial density 2r/R^2)."""

    def __init__(self, max_radius: float):
        if max_radius <= 0:
            raise ValueError("max radius must be positive")
        self.max_radius = max_radius
        self.support_radius = max_radius

    def draw_radii(self, rng, size):
        return self.max_radius * np.sqrt(rng.uniform(0.0, 1.0, size))

    def density_profile(self, r):
        r = np.asarray(r, float)
        return np.where(r <= self.max_radius,
                        1.0 / (math.pi * self.max_radius**2), 0.0)

    def radial_cdf(self, r):
        r = np.asarray(r, float)
        return np.minimum(r**2 / self.max_radius**2, 1.0)


class TruncationError(RuntimeError):
    """Rejection sampling could not produce an in-bound output."""


class TruncatedSampler(RadialNoiseSampler):
    """Rejection-sampled restriction of a sampler to a disk of radius q_max."""

    MAX_DRAWS = 10_000

    def __init__(self, base: RadialNoiseSampler, q_max: float):
        accept = float(base.radial_cdf(q_max))
        if accept < 1e-6:
            raise TruncationError(
                f"acceptance probability {accept} too small at radius {q_max}"
            )
        self.base = base
        self.q_max = q_max
        self.accept = accept
        self.support_radius = min(q_max, getattr(base, "support_radius", np.inf))

    def draw_radii(self, rng, size):
        out = np.empty(size)
        filled = 0
        for _ in range(self.MAX_DRAWS):
            need = size - filled
            if need == 0:
                return out
            r = self.base.draw_radii(rng, need)
            good = r[r <= self.q_max]
            out[filled:filled + len(good)] = good
            filled += len(good)
        raise TruncationError("rejection sampling starved")

    def density_profile(self, r):
        r = np.asarray(r, float)
        return np.where(r <= self.q_max,
                        np.asarray(self.base.density_profile(r), float) / self.accept,
                        0.0)

    def radial_cdf(self, r):
        return np.minimum(np.asarray(self.base.radial_cdf(r), float) / self.accept, 1.0)


def truncate(sampler: RadialNoiseSampler, q_max: float) -> TruncatedSampler:
    """Bound a sampler's worst-case displacement at q_max km."""
    return TruncatedSampler(sampler, q_max)


# ---------------------------------------------------------------------------
# discretization helpers

def discretize(
    sampler: NoiseSampler, poi: PoiSet, outputs: np.ndarray | None = None
) -> DiscreteMechanism:
    """Row-normalized matrix of sampler densities on a finite output set."""
    if outputs is None:
        outputs = poi.coords
    rows = np.array([sampler.densities(z, poi.coords) for z in outputs]).T
    sums = rows.sum(axis=1, keepdims=True)
    if (sums <= 0).any():
        raise ValueError("a POI has zero density on every output point")
    return DiscreteMechanism(poi, outputs, rows / sums)


def truncate_discrete(
    mech: DiscreteMechanism, dq, q_max: float
) -> DiscreteMechanism:
    """Zero out entries with d_Q(x, z) > q_max and renormalize rows."""
    d = distance_matrix(dq, mech)
    matrix = np.where(d <= q_max, mech.matrix, 0.0)
    sums = matrix.sum(axis=1, keepdims=True)
    if (sums <= 0).any():
        bad = int(np.flatnonzero(sums.ravel() <= 0)[0])
        raise ValueError(f"input {bad} has no output within {q_max}")
    return DiscreteMechanism(mech.inputs, mech.outputs, matrix / sums,
                             output_tags=mech.output_tags)
