"""Scikit-learn style front end for the solver.

``DcaPrivacyFunnel`` follows the estimator protocol (``get_params`` /
``set_params`` / ``fit`` / ``transform`` / ``predict``) without
depending on scikit-learn, so it composes with tooling that clones and
re-parameterizes estimators. ``fit`` consumes the joint pmf of the
public and private variables; ``transform`` maps public symbols to
their code distributions under the fitted encoder.
"""

import inspect

import numpy as np

from .dca import DcaConfig, DcaResult, dca_run
from .probability import InvalidDistributionError, JointXY


class NotFittedError(ValueError):
    """fit must be called before using the fitted encoder."""


def check_joint_matrix(X) -> JointXY:
    """Validate a joint pmf array of shape (|X|, |Y|) (or pass through a JointXY)."""
    if isinstance(X, JointXY):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise InvalidDistributionError("expected a 2-D joint pmf array of shape (|X|, |Y|)")
    return JointXY.from_joint_matrix(arr)


def check_symbols(X, n_x: int) -> np.ndarray:
    """Normalize symbol input to row distributions over X.

    Accepts integer symbol indices of shape (n,) or row distributions
    (one-hot or soft) of shape (n, |X|).
    """
    arr = np.asarray(X)
    if arr.ndim == 1:
        idx = arr.astype(int)
        if np.any(idx != arr) or idx.min(initial=0) < 0 or idx.max(initial=0) >= n_x:
            raise ValueError(f"symbol indices must be integers in [0, {n_x})")
        rows = np.zeros((idx.shape[0], n_x))
        rows[np.arange(idx.shape[0]), idx] = 1.0
        return rows
    if arr.ndim == 2 and arr.shape[1] == n_x:
        rows = np.asarray(arr, dtype=float)
        if np.any(rows < 0):
            raise ValueError("row weights must be non-negative")
        sums = rows.sum(axis=1, keepdims=True)
        if np.any(sums <= 0):
            raise ValueError("every row needs positive total weight")
        return rows / sums
    raise ValueError(f"expected shape (n,) or (n, {n_x}), got {arr.shape}")


class DcaPrivacyFunnel:
    """Privacy-funnel encoder fitted by the difference-of-convex solver.

    Parameters mirror the solver configuration; ``inner_kind`` selects
    the ridge (``"ridge"``) or log-domain sparse (``"sparse_log"``)
    inner problem. After ``fit`` the learned column-stochastic encoder
    is available as ``encoder_`` with the achieved information-plane
    coordinates in bits.
    """

    def __init__(
        self,
        card_z: int = 2,
        beta: float = 1.0,
        alpha: float = 1.0,
        inner_kind: str = "ridge",
        outer_tol: float = 1e-6,
        outer_max_iter: int = 10000,
        inner_tol: float = 1e-9,
        inner_max_iter: int = 5000,
        seed: int = 0,
    ):
        self.card_z = card_z
        self.beta = beta
        self.alpha = alpha
        self.inner_kind = inner_kind
        self.outer_tol = outer_tol
        self.outer_max_iter = outer_max_iter
        self.inner_tol = inner_tol
        self.inner_max_iter = inner_max_iter
        self.seed = seed

    @classmethod
    def _param_names(cls) -> list:
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "DcaPrivacyFunnel":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"unknown parameter {name!r} for DcaPrivacyFunnel")
            setattr(self, name, value)
        return self

    def _config(self) -> DcaConfig:
        return DcaConfig(
            beta=self.beta,
            alpha=self.alpha,
            inner_kind=self.inner_kind,
            outer_tol=self.outer_tol,
            outer_max_iter=self.outer_max_iter,
            inner_tol=self.inner_tol,
            inner_max_iter=self.inner_max_iter,
            seed=self.seed,
        )

    def fit(self, X, y=None) -> "DcaPrivacyFunnel":
        """Solve for the encoder of the joint pmf ``X`` (shape (|X|, |Y|))."""
        joint = check_joint_matrix(X)
        result: DcaResult = dca_run(joint, self.card_z, self._config())
        self.joint_ = joint
        self.result_ = result
        self.encoder_ = result.encoder
        self.loss_trace_ = result.loss_trace
        self.converged_ = result.converged
        self.n_iter_ = result.iterations
        self.i_zx_bits_ = result.i_zx_bits
        self.i_zy_bits_ = result.i_zy_bits
        self.stationarity_gap_ = result.stationarity_gap
        return self

    def _require_fitted(self):
        if not hasattr(self, "encoder_"):
            raise NotFittedError("this DcaPrivacyFunnel instance is not fitted yet")

    def transform(self, X) -> np.ndarray:
        """Code distributions for public symbols: rows of P(Z|x)."""
        self._require_fitted()
        rows = check_symbols(X, self.encoder_.n_x)
        return rows @ self.encoder_.matrix.T

    def fit_transform(self, X, y=None, symbols=None) -> np.ndarray:
        self.fit(X, y)
        if symbols is None:
            symbols = np.arange(self.encoder_.n_x)
        return self.transform(symbols)

    def predict(self, X) -> np.ndarray:
        """Most likely code symbol for each input symbol."""
        return np.argmax(self.transform(X), axis=1)

    def score(self, X=None, y=None) -> float:
        """Negative Lagrangian loss of the fitted encoder (higher is better)."""
        self._require_fitted()
        return -self.result_.loss_nats
