"""Geometric-median machinery and optimal Bayesian output remapping.

Remapping replaces each mechanism output z by the point minimizing the
expected quality loss under the posterior weights of z, which makes any
mechanism optimal in terms of the average adversary error when the privacy
and quality-loss distances coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import Euclidean, SquaredEuclidean
from .model import DiscreteMechanism, Prior, compose


class ConvergenceError(RuntimeError):
    """Weiszfeld iteration exhausted its budget; carries the best iterate."""

    def __init__(self, message, best: np.ndarray):
        super().__init__(message)
        self.best = best


class UnsupportedDistanceError(ValueError):
    """Remapping under this quality-loss distance is not defined."""


@dataclass(frozen=True)
class WeiszfeldConfig:
    tolerance: float = 1e-6  # km, step-size stopping criterion
    max_iterations: int = 10_000
    singularity_eps: float = 1e-9  # km, escape step off a data point

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("invalid Weiszfeld configuration")


def weighted_distance_sum(point, points: np.ndarray, weights: np.ndarray) -> float:
    """Objective sum_i w_i ||point - p_i||."""
    d = np.linalg.norm(np.asarray(points, float) - np.asarray(point, float), axis=1)
    return float(weights @ d)


def geometric_median(
    points: np.ndarray,
    weights: np.ndarray,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> np.ndarray:
    """Weighted geometric median by Weiszfeld's iteration.

    When the iterate coincides with a data point, the standard subgradient
    condition decides whether that point is the minimizer; otherwise the
    iterate is nudged along the descent direction and iteration continues.
    """
    pts = np.asarray(points, float)
    w = np.asarray(weights, float)
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("weights must be non-negative with positive total")
    active = w > 0
    pts, w = pts[active], w[active]
    if len(pts) == 1:
        return pts[0].copy()

    def vertex_gradient(i):
        # gradient of the objective restricted to the other points, at pts[i]
        diff = pts - pts[i]
        dist = np.linalg.norm(diff, axis=1)
        others = dist > 0
        return -(w[others, None] * diff[others] / dist[others, None]).sum(axis=0)

    # a dominant point is often the minimizer outright (concentrated weights)
    top = int(w.argmax())
    if np.linalg.norm(vertex_gradient(top)) <= w[top]:
        return pts[top].copy()

    cur = (w[:, None] * pts).sum(axis=0) / w.sum()
    prev_obj = math.inf
    for _ in range(cfg.max_iterations):
        diff = pts - cur
        dist = np.linalg.norm(diff, axis=1)
        hit = dist < 1e-10
        if hit.any():
            i = int(np.flatnonzero(hit)[0])
            grad = vertex_gradient(i)
            gnorm = np.linalg.norm(grad)
            if gnorm <= w[i]:
                return pts[i].copy()
            cur = pts[i] - cfg.singularity_eps * grad / gnorm
            continue
        obj = float(w @ dist)
        inv = w / dist
        nxt = (inv[:, None] * pts).sum(axis=0) / inv.sum()
        step = np.linalg.norm(nxt - cur)
        cur = nxt
        # stop on a tiny move, or on objective stagnation (near-degenerate
        # weight ties make the iterate crawl along a flat valley)
        if step < cfg.tolerance or prev_obj - obj < 1e-10 * max(1.0, obj):
            return cur
        prev_obj = obj
    raise ConvergenceError(
        f"no convergence in {cfg.max_iterations} Weiszfeld iterations", cur
    )


def _column_target(z, weights, coords, dq, cfg):
    """Minimizer of sum_x w_x d_Q(x, z') over the plane."""
    if not weights.any():
        return np.asarray(z, float)
    if isinstance(dq, SquaredEuclidean):
        return (weights[:, None] * coords).sum(axis=0) / weights.sum()
    if isinstance(dq, Euclidean):
        return geometric_median(coords, weights, cfg)
    raise UnsupportedDistanceError(
        "optimal remapping is only defined for Euclidean or squared-Euclidean loss"
    )


@dataclass(frozen=True)
class RemapPlan:
    """Per-output remap targets; feasible[j] is False only when the worst-case
    constraint forced output j to stay in place."""

    targets: np.ndarray  # (m, 2)
    feasible: np.ndarray  # (m,) bool


def plan_optimal_remap(
    mech: DiscreteMechanism,
    prior: Prior,
    dq,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> RemapPlan:
    coords = mech.inputs.coords
    targets = np.empty_like(mech.outputs)
    for j in range(mech.n_outputs):
        weights = prior.pmf * mech.matrix[:, j]
        targets[j] = _column_target(mech.outputs[j], weights, coords, dq, cfg)
    return RemapPlan(targets, np.ones(mech.n_outputs, dtype=bool))


def optimal_remap(
    mech: DiscreteMechanism,
    prior: Prior,
    dq,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> DiscreteMechanism:
    """Replace each output by the expected-loss minimizer of its posterior."""
    return compose(mech, plan_optimal_remap(mech, prior, dq, cfg).targets)


def plan_constrained_remap(
    mech: DiscreteMechanism,
    prior: Prior,
    dq,
    q_max: float,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> RemapPlan:
    """Remap targets subject to max d_Q(x, target) <= q_max over each output's
    posterior support.

    The inner minimization searches the candidate set {z} + support points +
    unconstrained minimizer; for a mechanism already satisfying the
    worst-case bound, z itself is always feasible.
    """
    if np.isinf(q_max):
        plan = plan_optimal_remap(mech, prior, dq, cfg)
        return plan
    coords = mech.inputs.coords
    targets = np.empty_like(mech.outputs)
    feasible = np.ones(mech.n_outputs, dtype=bool)
    # No tolerance here: keeping z is exactly feasible for truncated inputs,
    # and the bound must hold exactly in the resulting q_wc column.
    slack = 0.0
    for j in range(mech.n_outputs):
        weights = prior.pmf * mech.matrix[:, j]
        support = weights > 0
        if not support.any():
            targets[j] = mech.outputs[j]
            continue
        sup_pts = coords[support]
        free = _column_target(mech.outputs[j], weights, coords, dq, cfg)
        candidates = np.vstack([mech.outputs[j][None, :], sup_pts, free[None, :]])
        worst = np.linalg.norm(
            candidates[:, None, :] - sup_pts[None, :, :], axis=-1
        ).max(axis=1)
        if isinstance(dq, SquaredEuclidean):
            worst = worst**2
        ok = worst <= q_max + slack
        if not ok.any():
            targets[j] = mech.outputs[j]
            feasible[j] = False
            continue
        cand = candidates[ok]
        if isinstance(dq, SquaredEuclidean):
            cost = np.array(
                [
                    weights[support]
                    @ ((sup_pts - c) ** 2).sum(axis=1)
                    for c in cand
                ]
            )
        else:
            cost = np.array(
                [weighted_distance_sum(c, sup_pts, weights[support]) for c in cand]
            )
        targets[j] = cand[int(cost.argmin())]
    return RemapPlan(targets, feasible)


def constrained_remap(
    mech: DiscreteMechanism,
    prior: Prior,
    dq,
    q_max: float,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> DiscreteMechanism:
    """Optimal remapping restricted to targets honouring the q_max bound."""
    return compose(mech, plan_constrained_remap(mech, prior, dq, q_max, cfg).targets)
