"""Privacy and quality-loss metrics for discrete mechanisms.

Implemented metrics: average and worst-case quality loss, average adversary
error, conditional entropy (bits), geo-indistinguishability level, their
worst-case-output variants, and a relaxed geo-indistinguishability check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import DomainMismatchError, Euclidean, SquaredEuclidean, TagHamming
from .model import DiscreteMechanism, Prior, output_marginal
from .remap import WeiszfeldConfig, geometric_median, weighted_distance_sum

#: sentinel for a perfectly indistinguishable mechanism (no finite epsilon needed)
GI_UNBOUNDED = math.inf


@dataclass
class MetricReport:
    """Bundle of metric values for one mechanism evaluation.

    Distances are in the units of the distance functions used (km for
    Euclidean); entropies are in bits. ``p_gi`` is ``None`` when not
    computable (e.g. samplers without an analytic guarantee).
    """

    q_avg: float
    q_wc: float
    p_ae: float
    p_ce: float
    p_gi: float | None
    p_wc_ae: float
    p_wc_ce: float
    provenance: str = "exact"

    CSV_HEADER = "mechanism,param,q_avg,q_wc,p_ae,p_ce,p_gi,p_wc_ae,p_wc_ce,provenance"

    def csv_row(self, mechanism: str, param: float) -> str:
        def fmt(v):
            if v is None:
                return "nan"
            return repr(float(v))

        vals = [self.q_avg, self.q_wc, self.p_ae, self.p_ce, self.p_gi,
                self.p_wc_ae, self.p_wc_ce]
        return ",".join([mechanism, repr(float(param))] + [fmt(v) for v in vals]
                        + [self.provenance])


def distance_matrix(dfn, mech: DiscreteMechanism) -> np.ndarray:
    """d(x_i, z_j) for every input/output pair of the mechanism."""
    if getattr(dfn, "is_geometric", False):
        return dfn.pairwise(mech.inputs.coords, mech.outputs)
    if isinstance(dfn, TagHamming):
        return dfn.pairwise_tags(mech.inputs.tags, mech.output_tags)
    raise DomainMismatchError(f"unsupported distance function {dfn!r}")


def q_avg(mech: DiscreteMechanism, prior: Prior, dq) -> float:
    """Average quality loss sum_{x,z} pi(x) f[z|x] d_Q(x, z)."""
    d = distance_matrix(dq, mech)
    return float(prior.pmf @ (mech.matrix * d).sum(axis=1))


def q_wc(mech: DiscreteMechanism, prior: Prior, dq) -> float:
    """Worst-case loss: max d_Q over pairs with pi(x) > 0 and f[z|x] > 0."""
    d = distance_matrix(dq, mech)
    mask = (prior.pmf[:, None] > 0) & (mech.matrix > 0)
    if not mask.any():
        return 0.0
    return float(d[mask].max())


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def adversary_estimate(
    post: np.ndarray,
    poi_coords: np.ndarray,
    dp,
    candidates: np.ndarray | None = None,
    candidate_tags=None,
    poi_tags=None,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
):
    """Optimal Bayesian estimate for a posterior.

    With ``candidates`` given, scans them exhaustively (lowest index wins
    ties); otherwise minimizes over the continuous plane, which requires a
    geometric distance. Returns ``(estimate, expected_error)`` where the
    estimate is a plane point, or a candidate index in candidate mode.
    """
    post = np.asarray(post, float)
    if candidates is not None:
        errs = _candidate_errors(post, poi_coords, dp, candidates,
                                 candidate_tags, poi_tags)
        i = int(errs.argmin())
        return i, float(errs[i])
    if isinstance(dp, SquaredEuclidean):
        est = (post[:, None] * poi_coords).sum(axis=0)
        err = float(post @ ((poi_coords - est) ** 2).sum(axis=1))
        return est, err
    if isinstance(dp, Euclidean):
        est = geometric_median(poi_coords, post, cfg)
        return est, weighted_distance_sum(est, poi_coords, post)
    raise DomainMismatchError(
        "continuous-plane estimation needs a geometric distance; "
        "use candidate mode for tag-Hamming"
    )


def _candidate_errors(post, poi_coords, dp, candidates, candidate_tags, poi_tags):
    if getattr(dp, "is_geometric", False):
        d = dp.pairwise(np.asarray(candidates, float), poi_coords)
    else:
        d = dp.pairwise_tags(candidate_tags, poi_tags)
    return d @ post


def p_ae(
    mech: DiscreteMechanism,
    prior: Prior,
    dp,
    candidates: np.ndarray | None = None,
    candidate_tags=None,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> float:
    """Average adversary error with optimal per-output estimation."""
    return float(np.sum(_per_output_errors(mech, prior, dp, candidates,
                                           candidate_tags, cfg)))


def _per_output_errors(mech, prior, dp, candidates, candidate_tags, cfg):
    """Unnormalized inner minima min_xhat sum_x pi f d_P, one per output."""
    coords = mech.inputs.coords
    vals = np.zeros(mech.n_outputs)
    for j in range(mech.n_outputs):
        w = prior.pmf * mech.matrix[:, j]
        mass = w.sum()
        if mass <= 0:
            continue
        _, err = adversary_estimate(
            w / mass, coords, dp,
            candidates=candidates, candidate_tags=candidate_tags,
            poi_tags=mech.inputs.tags, cfg=cfg,
        )
        vals[j] = mass * err
    return vals


def p_ce(mech: DiscreteMechanism, prior: Prior) -> float:
    """Conditional entropy sum_z P_Z(z) H(x|z), in bits."""
    pz = output_marginal(mech, prior)
    joint = prior.pmf[:, None] * mech.matrix
    total = 0.0
    for j in np.flatnonzero(pz > 0):
        total += pz[j] * _entropy_bits(joint[:, j] / pz[j])
    return float(total)


def mutual_information_bits(mech: DiscreteMechanism, prior: Prior) -> float:
    """I(X;Z) in bits, from the joint distribution."""
    return prior.entropy_bits() - p_ce(mech, prior)


def p_gi(mech: DiscreteMechanism, dp=Euclidean()) -> float:
    """Geo-indistinguishability level 1/epsilon in km.

    Zero when some output has positive probability under one input and zero
    under another (no finite epsilon); the sentinel ``GI_UNBOUNDED`` when all
    rows are identical.
    """
    d = dp.pairwise(mech.inputs.coords, mech.inputs.coords)
    with np.errstate(divide="ignore"):
        logf = np.log(mech.matrix)
    n = mech.inputs.n
    best = GI_UNBOUNDED
    for i in range(n):
        for k in range(i + 1, n):
            zi, zk = mech.matrix[i] > 0, mech.matrix[k] > 0
            if (zi != zk).any():
                return 0.0
            both = zi  # == zk
            if not both.any():
                continue
            ratio = np.abs(logf[i, both] - logf[k, both]).max()
            if ratio > 0:
                best = min(best, d[i, k] / ratio)
    return best


@dataclass(frozen=True)
class GeoIndCheck:
    passed: bool
    worst_violation: float
    witness: tuple[int, int, int] | None  # (x, x', z)


def geo_ind_relaxed_check(
    mech: DiscreteMechanism, epsilon: float, delta: float, dp=Euclidean()
) -> GeoIndCheck:
    """Per-atom check of f[z|x] <= e^{eps d_P(x,x')} f[z|x'] + delta."""
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must be in [0, 1)")
    d = dp.pairwise(mech.inputs.coords, mech.inputs.coords)
    f = mech.matrix
    # violation[i, k, j] = f[i, j] - e^{eps d_ik} f[k, j] - delta
    bound = np.exp(epsilon * d)[:, :, None] * f[None, :, :] + delta
    viol = f[:, None, :] - bound
    worst = float(viol.max())
    if worst <= 1e-12:
        return GeoIndCheck(True, worst, None)
    i, k, j = np.unravel_index(int(viol.argmax()), viol.shape)
    return GeoIndCheck(False, worst, (int(i), int(k), int(j)))


def p_wc_ae(
    mech: DiscreteMechanism,
    prior: Prior,
    dp,
    candidates: np.ndarray | None = None,
    candidate_tags=None,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> float:
    """Adversary error at the most vulnerable output with P_Z(z) > 0."""
    pz = output_marginal(mech, prior)
    vals = _per_output_errors(mech, prior, dp, candidates, candidate_tags, cfg)
    live = pz > 0
    return float((vals[live] / pz[live]).min())


def p_wc_ce(mech: DiscreteMechanism, prior: Prior) -> float:
    """Posterior entropy (bits) at the most revealing output with P_Z(z) > 0."""
    pz = output_marginal(mech, prior)
    joint = prior.pmf[:, None] * mech.matrix
    return float(
        min(_entropy_bits(joint[:, j] / pz[j]) for j in np.flatnonzero(pz > 0))
    )


def report(
    mech: DiscreteMechanism,
    prior: Prior,
    dq,
    dp,
    candidates: np.ndarray | None = None,
    candidate_tags=None,
    compute_gi: bool = True,
    cfg: WeiszfeldConfig = WeiszfeldConfig(),
) -> MetricReport:
    """Evaluate every metric of a discrete mechanism exactly."""
    return MetricReport(
        q_avg=q_avg(mech, prior, dq),
        q_wc=q_wc(mech, prior, dq),
        p_ae=p_ae(mech, prior, dp, candidates, candidate_tags, cfg),
        p_ce=p_ce(mech, prior),
        p_gi=p_gi(mech) if compute_gi else None,
        p_wc_ae=p_wc_ae(mech, prior, dp, candidates, candidate_tags, cfg),
        p_wc_ce=p_wc_ce(mech, prior),
        provenance="exact",
    )
