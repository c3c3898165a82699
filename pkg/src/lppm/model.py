"""Core probabilistic objects: priors, discrete mechanisms, samplers.

A discrete mechanism is a dense row-stochastic matrix ``matrix[i, j]``
giving the probability of reporting output ``j`` when the true location is
input POI ``i``.
"""

from __future__ import annotations

import abc
import csv
from dataclasses import dataclass, field

import numpy as np

from .geo import TagHamming

# Probabilities below this are clamped to zero to stabilise log computations.
PROB_CLAMP = 1e-15
ROW_SUM_TOL = 1e-9


class DomainError(ValueError):
    """Mechanism / prior / POI-set domains do not match."""


class ImpossibleObservationError(ValueError):
    """A posterior was requested for an observation of probability zero."""


@dataclass(frozen=True)
class PoiSet:
    """Ordered, finite set of input locations in plane coordinates."""

    coords: np.ndarray  # (n, 2) km
    tags: tuple | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, float)
        object.__setattr__(self, "coords", coords)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] == 0:
            raise ValueError("coords must be a non-empty (n, 2) array")
        if len(np.unique(coords, axis=0)) != len(coords):
            raise ValueError("duplicate coordinates in POI set")
        if self.tags is not None:
            object.__setattr__(self, "tags", tuple(self.tags))
            if len(self.tags) != len(coords):
                raise ValueError("one tag per POI required")

    @property
    def n(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class Prior:
    """Probability mass function over a POI set."""

    poi: PoiSet
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, float)
        object.__setattr__(self, "pmf", pmf)
        if pmf.shape != (self.poi.n,):
            raise DomainError("prior length does not match POI set")
        if (pmf < 0).any():
            raise ValueError("negative prior mass")
        if abs(pmf.sum() - 1.0) > 1e-12:
            raise ValueError(f"prior sums to {pmf.sum()}, not 1")

    def entropy_bits(self) -> float:
        p = self.pmf[self.pmf > 0]
        return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True)
class DiscreteMechanism:
    """Row-stochastic conditional distribution f[z|x] over finite alphabets."""

    inputs: PoiSet
    outputs: np.ndarray  # (m, 2) km
    matrix: np.ndarray  # (n, m)
    output_tags: tuple | None = None

    def __post_init__(self):
        outputs = np.asarray(self.outputs, float)
        matrix = np.asarray(self.matrix, float)
        if (matrix < 0).any():
            if matrix.min() < -1e-12:
                raise ValueError(f"negative probability {matrix.min()} in mechanism")
            matrix = np.where(matrix < 0, 0.0, matrix)
        matrix = np.where(matrix < PROB_CLAMP, 0.0, matrix)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "matrix", matrix)
        if outputs.ndim != 2 or outputs.shape[1] != 2:
            raise ValueError("outputs must be an (m, 2) array")
        if matrix.shape != (self.inputs.n, len(outputs)):
            raise DomainError("matrix shape does not match alphabets")
        rows = matrix.sum(axis=1)
        if np.abs(rows - 1.0).max() > ROW_SUM_TOL:
            bad = int(np.abs(rows - 1.0).argmax())
            raise ValueError(f"row {bad} sums to {rows[bad]}")
        if self.output_tags is not None:
            object.__setattr__(self, "output_tags", tuple(self.output_tags))
            if len(self.output_tags) != len(outputs):
                raise ValueError("one tag per output required")

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)


def posterior(prior: Prior, likelihood: np.ndarray) -> np.ndarray:
    """Bayes update p(x|z) from per-input likelihood values f(z|x)."""
    like = np.asarray(likelihood, float)
    if like.shape != prior.pmf.shape:
        raise DomainError("likelihood length does not match prior")
    joint = prior.pmf * like
    total = joint.sum()
    if total <= 0:
        raise ImpossibleObservationError("all-zero posterior numerator")
    post = joint / total
    post[post < PROB_CLAMP] = 0.0
    return post / post.sum()


def output_marginal(mech: DiscreteMechanism, prior: Prior) -> np.ndarray:
    """P_Z(z) = sum_x pi(x) f[z|x]."""
    if prior.poi is not mech.inputs and prior.poi.n != mech.inputs.n:
        raise DomainError("prior and mechanism input alphabets differ")
    return prior.pmf @ mech.matrix


def compose(
    mech: DiscreteMechanism,
    targets: np.ndarray,
    target_tags=None,
) -> DiscreteMechanism:
    """Apply a deterministic output remap z -> targets[z].

    Outputs mapped to the same target point are merged by summing their
    columns; rows stay stochastic.
    """
    targets = np.asarray(targets, float)
    if targets.shape != (mech.n_outputs, 2):
        raise DomainError("one target per output required")
    uniq, inverse = np.unique(targets, axis=0, return_inverse=True)
    merged = np.zeros((mech.inputs.n, len(uniq)))
    np.add.at(merged.T, inverse, mech.matrix.T)
    tags = None
    if target_tags is not None:
        tags = [None] * len(uniq)
        for j, k in enumerate(inverse):
            tags[k] = target_tags[j]
        tags = tuple(tags)
    return DiscreteMechanism(mech.inputs, uniq, merged, output_tags=tags)


def validate(mech: DiscreteMechanism) -> list[str]:
    """Diagnostic report on a mechanism matrix; empty list means clean."""
    notes = []
    m = mech.matrix
    if np.isnan(m).any():
        notes.append(f"{int(np.isnan(m).sum())} NaN entries")
    neg = m[m < 0]
    if len(neg):
        if neg.min() >= -1e-12:
            notes.append("tiny negative entries clamped to zero")
        else:
            notes.append(f"negative entry {neg.min()}")
    rows = np.nan_to_num(m).sum(axis=1)
    for i in np.flatnonzero(np.abs(rows - 1.0) > ROW_SUM_TOL):
        notes.append(f"row {i} sums to {rows[i]:.12g}")
    return notes


class NoiseSampler(abc.ABC):
    """Continuous mechanism contract: sample z given x, evaluate f(z|x)."""

    #: declared worst-case displacement in km (inf if unbounded)
    support_radius: float = np.inf

    @abc.abstractmethod
    def draw(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sample an output location for input ``x``."""

    @abc.abstractmethod
    def density(self, z: np.ndarray, x: np.ndarray) -> float:
        """Planar density f(z|x)."""

    def densities(self, z: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """f(z|x) for each row of ``xs``; default loops over :meth:`density`."""
        return np.array([self.density(z, x) for x in np.asarray(xs, float)])


def mechanism_to_csv(mech: DiscreteMechanism, path) -> None:
    """Dump f[z|x] as ``input_id,output_id,prob`` rows (zeros omitted)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["input_id", "output_id", "prob"])
        for i, j in zip(*np.nonzero(mech.matrix)):
            w.writerow([i, j, repr(float(mech.matrix[i, j]))])


def mechanism_matrix_from_csv(path, n_inputs: int, n_outputs: int) -> np.ndarray:
    """Read a matrix written by :func:`mechanism_to_csv`."""
    m = np.zeros((n_inputs, n_outputs))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            m[int(row["input_id"]), int(row["output_id"])] = float(row["prob"])
    return m
