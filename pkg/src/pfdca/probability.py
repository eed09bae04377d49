"""Discrete probability primitives: validated distribution types and the
information measures every solver in this package is built on.

Conventions used throughout:

* conditional distributions are column-stochastic matrices, entry (i, j)
  holding P(out_i | cond_j);
* all information quantities are computed in nats, conversion to bits
  happens only at reporting boundaries (``NATS_TO_BITS``);
* ``0 * log 0 == 0`` for entropies, while probabilities feeding an
  optimization step are floored at ``LOG_CLAMP`` before any log.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

# Tolerance accepted as exactly stochastic on construction.
STOCHASTIC_ATOL = 1e-12
# Constructors repair (renormalize) drift up to this and reject anything worse.
REPAIR_ATOL = 1e-9
# Floor applied to probabilities before logs on optimization paths.
LOG_CLAMP = 1e-12

LN2 = math.log(2.0)
NATS_TO_BITS = 1.0 / LN2


class InvalidDistributionError(ValueError):
    """Raised when an input fails non-negativity or normalization checks."""


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.size == 0:
        raise InvalidDistributionError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidDistributionError(f"{name} has non-finite entries")
    if np.any(arr < -REPAIR_ATOL):
        raise InvalidDistributionError(f"{name} has negative entries")
    np.clip(arr, 0.0, None, out=arr)
    return arr


def _normalize(arr: np.ndarray, sums, name: str) -> np.ndarray:
    err = np.max(np.abs(sums - 1.0))
    if err > REPAIR_ATOL:
        raise InvalidDistributionError(f"{name} sums off by {err:.3e} (max repairable {REPAIR_ATOL:.0e})")
    if err > STOCHASTIC_ATOL:
        arr = arr / sums
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Probability mass function over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.probs, "probs")
        if arr.ndim != 1:
            raise InvalidDistributionError("probs must be a vector")
        arr = _normalize(arr, arr.sum(), "probs")
        object.__setattr__(self, "probs", arr)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @staticmethod
    def uniform(n: int) -> "DiscreteDist":
        return DiscreteDist(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class CondDist:
    """Column-stochastic conditional distribution.

    ``matrix[i, j] = P(out_i | cond_j)``; every column sums to one.
    """

    matrix: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.matrix, "matrix")
        if arr.ndim != 2:
            raise InvalidDistributionError("matrix must be 2-D")
        arr = _normalize(arr, arr.sum(axis=0, keepdims=True), "matrix columns")
        object.__setattr__(self, "matrix", arr)

    @property
    def n_out(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cond(self) -> int:
        return self.matrix.shape[1]

    @staticmethod
    def identity(n: int) -> "CondDist":
        return CondDist(np.eye(n))


@dataclass(frozen=True, eq=False)
class JointXY:
    """Known joint source: marginal over X plus the channel P(Y|X).

    The derived marginal over Y must be strictly positive so that the
    Bayes inverse P(X|Y) exists everywhere.
    """

    p_x: DiscreteDist
    y_given_x: CondDist

    def __post_init__(self):
        if self.y_given_x.n_cond != self.p_x.n:
            raise InvalidDistributionError(
                f"channel conditions on {self.y_given_x.n_cond} symbols, marginal has {self.p_x.n}"
            )
        if np.min(self.p_y.probs) <= 0.0:
            raise InvalidDistributionError("derived marginal over Y has a zero entry")

    @property
    def n_x(self) -> int:
        return self.p_x.n

    @property
    def n_y(self) -> int:
        return self.y_given_x.n_out

    @property
    def p_y(self) -> DiscreteDist:
        return DiscreteDist(self.y_given_x.matrix @ self.p_x.probs)

    def joint_matrix(self) -> np.ndarray:
        """Joint pmf as an (|X|, |Y|) array, entry (x, y) = P(x, y)."""
        return (self.y_given_x.matrix * self.p_x.probs[None, :]).T

    @staticmethod
    def from_joint_matrix(pxy) -> "JointXY":
        """Build from a joint pmf array of shape (|X|, |Y|)."""
        pxy = _frozen_array(pxy, "joint matrix")
        if pxy.ndim != 2:
            raise InvalidDistributionError("joint matrix must be 2-D")
        total = pxy.sum()
        if abs(total - 1.0) > REPAIR_ATOL:
            raise InvalidDistributionError(f"joint matrix sums to {total!r}")
        pxy = pxy / total
        p_x = pxy.sum(axis=1)
        if np.min(p_x) <= 0.0:
            raise InvalidDistributionError("joint matrix has a zero row (zero-mass x symbol)")
        return JointXY(DiscreteDist(p_x), CondDist((pxy / p_x[:, None]).T))


@dataclass(frozen=True, eq=False)
class Encoder:
    """Stochastic code assignment P(Z|X), the solvers' decision variable."""

    z_given_x: CondDist
    card_z: int = 0

    def __post_init__(self):
        if self.card_z == 0:
            object.__setattr__(self, "card_z", self.z_given_x.n_out)
        elif self.card_z != self.z_given_x.n_out:
            raise InvalidDistributionError(
                f"card_z={self.card_z} but matrix has {self.z_given_x.n_out} rows"
            )

    @property
    def matrix(self) -> np.ndarray:
        return self.z_given_x.matrix

    @property
    def n_x(self) -> int:
        return self.z_given_x.n_cond

    @staticmethod
    def from_matrix(m) -> "Encoder":
        return Encoder(CondDist(m))

    @staticmethod
    def uniform(card_z: int, n_x: int) -> "Encoder":
        return Encoder(CondDist(np.full((card_z, n_x), 1.0 / card_z)))

    @staticmethod
    def identity(n: int) -> "Encoder":
        return Encoder(CondDist.identity(n))


def random_encoder(rng: np.random.Generator, card_z: int, n_x: int) -> Encoder:
    """Random start: uniform [0, 1] entries, columns normalized."""
    m = rng.random((card_z, n_x))
    m /= m.sum(axis=0, keepdims=True)
    return Encoder.from_matrix(m)


def random_interior_encoder(rng: np.random.Generator, card_z: int, n_x: int) -> Encoder:
    """Random encoder bounded away from the simplex boundary.

    Entries are drawn uniformly from [0.05, 1] before normalization so
    finite-difference probes stay inside the domain.
    """
    m = rng.uniform(0.05, 1.0, size=(card_z, n_x))
    m /= m.sum(axis=0, keepdims=True)
    return Encoder.from_matrix(m)


def entropy_nats(probs: np.ndarray) -> float:
    """Shannon entropy of a raw probability vector, 0*log(0) = 0."""
    p = np.asarray(probs, dtype=float)
    h = -float(np.sum(np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)))
    return max(h, 0.0)


def entropy(d: DiscreteDist) -> float:
    """Entropy in nats."""
    return entropy_nats(d.probs)


def column_entropies_nats(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    terms = np.where(m > 0.0, m * np.log(np.where(m > 0.0, m, 1.0)), 0.0)
    return -terms.sum(axis=0)


def mutual_information(marginal_cond: CondDist, cond_on: DiscreteDist) -> float:
    """I(out; cond) in nats for a channel and the distribution it conditions on.

    Computed as H(out marginal) minus the average column entropy; may be
    a hair below zero (>= -1e-12) through floating point cancellation.
    """
    if cond_on.n != marginal_cond.n_cond:
        raise InvalidDistributionError(
            f"conditioning alphabet mismatch: {cond_on.n} vs {marginal_cond.n_cond}"
        )
    w = cond_on.probs
    out_marginal = marginal_cond.matrix @ w
    return entropy_nats(out_marginal) - float(column_entropies_nats(marginal_cond.matrix) @ w)


def markov_compose(enc: Encoder, x_given_y: CondDist) -> CondDist:
    """Chain the encoder through P(X|Y): P(z|y) = sum_x P(z|x) P(x|y)."""
    if enc.n_x != x_given_y.n_out:
        raise InvalidDistributionError(
            f"encoder conditions on {enc.n_x} symbols, P(X|Y) outputs {x_given_y.n_out}"
        )
    return CondDist(enc.matrix @ x_given_y.matrix)


def bayes_invert(j: JointXY) -> CondDist:
    """Posterior channel P(X|Y) obtained by Bayes rule from P(Y|X) and p_X."""
    p_y = j.p_y.probs
    if np.min(p_y) <= 0.0:
        raise InvalidDistributionError("cannot invert: marginal over Y has zero mass")
    joint_yx = j.y_given_x.matrix * j.p_x.probs[None, :]
    return CondDist(joint_yx.T / p_y[None, :])


def pf_lagrangian(enc: Encoder, j: JointXY, beta: float) -> float:
    """Privacy-funnel Lagrangian I(Z;Y) - beta * I(Z;X), in nats."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    i_zy = mutual_information(markov_compose(enc, bayes_invert(j)), j.p_y)
    i_zx = mutual_information(enc.z_given_x, j.p_x)
    return i_zy - beta * i_zx


def joint_from_dict(payload: dict) -> JointXY:
    """Parse the JSON object format: ``{"p_x": [...], "p_y_given_x": [[...], ...]}``.

    ``p_y_given_x`` is a list of |Y| rows of |X| entries, row i column j
    holding P(y_i | x_j). Validation is strict: shape errors and
    normalization drift beyond repair tolerance are rejected.
    """
    try:
        p_x = payload["p_x"]
        rows = payload["p_y_given_x"]
    except (TypeError, KeyError) as exc:
        raise InvalidDistributionError(f"missing field in joint distribution object: {exc}") from exc
    try:
        matrix = np.array(rows, dtype=float)
    except ValueError as exc:
        raise InvalidDistributionError(f"p_y_given_x is not rectangular: {exc}") from exc
    if matrix.ndim != 2:
        raise InvalidDistributionError("p_y_given_x must be a matrix (list of equal-length rows)")
    if matrix.shape[1] != len(p_x):
        raise InvalidDistributionError(
            f"p_y_given_x rows have {matrix.shape[1]} entries, p_x has {len(p_x)}"
        )
    return JointXY(DiscreteDist(np.array(p_x, dtype=float)), CondDist(matrix))


def joint_to_dict(j: JointXY) -> dict:
    return {"p_x": j.p_x.probs.tolist(), "p_y_given_x": j.y_given_x.matrix.tolist()}


def load_joint(path) -> JointXY:
    """Load a joint distribution JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidDistributionError(f"not valid JSON: {exc}") from exc
    return joint_from_dict(payload)
