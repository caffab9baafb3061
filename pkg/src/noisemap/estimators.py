"""scikit-learn style wrappers around the reconstruction methods.

Reconstructors take the forward operator as a constructor parameter, learn
whatever they need from measurement-noise samples in ``fit`` and map
measurements to images in ``transform`` (``predict`` is an alias).
Measurements may be complex ``(n, K')`` or already realized ``(n, 2K')``.

    >>> rk = KaczmarzReconstructor(op, alpha=0.1, sweeps=20).fit()
    >>> images = rk.transform(y_delta)
"""
import copy

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .flow import FlowModel, TrainConfig, noise_to_flow, train
from .lda import LdaConfig, lda_reconstruct
from .operators import ForwardOperator, RealizedSystem, realize, realize_data
from .solvers import SolverConfig, kaczmarz_regularized, tikhonov_solve, whitening_matrix, wrk_solve


def _as_system(operator):
    if operator is None:
        raise ValueError("an operator is required")
    if isinstance(operator, RealizedSystem):
        return operator
    if isinstance(operator, ForwardOperator) or np.iscomplexobj(operator):
        return realize(operator)
    return RealizedSystem(np.asarray(operator, dtype=np.float64))


def check_measurements(Y, n_measurements=None):
    """Validate a batch of measurements and return realized ``(n, 2K')`` data."""
    Y = np.asarray(Y)
    if np.iscomplexobj(Y):
        Y = realize_data(np.atleast_2d(Y))
    Y = check_array(Y, dtype=np.float64, ensure_2d=False)
    Y = np.atleast_2d(Y)
    if n_measurements is not None and Y.shape[1] != n_measurements:
        raise ValueError(f"expected {n_measurements} realized measurements per sample, got {Y.shape[1]}")
    return Y


def check_noise(X):
    X = np.asarray(X)
    if np.iscomplexobj(X):
        return np.atleast_2d(X)
    X = check_array(X, dtype=np.float64)
    return X[:, 0::2] + 1j * X[:, 1::2]


class _Reconstructor(TransformerMixin, BaseEstimator):
    def _prepare(self):
        self.system_ = _as_system(self.operator)
        self.n_features_in_ = self.system_.n_measurements

    def fit(self, X=None, y=None):
        self._prepare()
        return self

    def transform(self, Y):
        check_is_fitted(self, "system_")
        return self._solve(check_measurements(Y, self.system_.n_measurements))

    def predict(self, Y):
        return self.transform(Y)


class TikhonovReconstructor(_Reconstructor):
    def __init__(self, operator=None, alpha=1.0):
        self.operator = operator
        self.alpha = alpha

    def _solve(self, Y):
        return tikhonov_solve(self.system_, Y, self.alpha)


class KaczmarzReconstructor(_Reconstructor):
    def __init__(self, operator=None, alpha=1.0, sweeps=10, shuffle=False, seed=0):
        self.operator = operator
        self.alpha = alpha
        self.sweeps = sweeps
        self.shuffle = shuffle
        self.seed = seed

    def _config(self):
        return SolverConfig(self.alpha, self.sweeps, self.shuffle, self.seed)

    def _solve(self, Y):
        return kaczmarz_regularized(self.system_, Y, self._config())


class WhitenedKaczmarzReconstructor(KaczmarzReconstructor):
    """Kaczmarz on whitened rows; ``fit`` estimates the weights from noise."""

    def fit(self, X, y=None):
        self._prepare()
        self.whitening_ = whitening_matrix(check_noise(X))
        if self.whitening_.diag.size != self.system_.n_measurements:
            raise ValueError("noise samples do not match the operator's measurement count")
        return self

    def _solve(self, Y):
        check_is_fitted(self, "whitening_")
        return wrk_solve(self.system_, Y, self.whitening_, self._config())


class NoiseFlowDensity(DensityMixin, BaseEstimator):
    """Normalizing-flow density of noise vectors, fitted by maximum likelihood."""

    def __init__(self, architecture="multiscale", widths=(16, 8, 8), depth=6, n_couplings=2,
                 batch_size=256, epochs=25, learning_rate=1e-3, validation_fraction=0.1, seed=0):
        self.architecture = architecture
        self.widths = widths
        self.depth = depth
        self.n_couplings = n_couplings
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.validation_fraction = validation_fraction
        self.seed = seed

    def build(self, m):
        """Untrained flow for noise vectors of length ``m``."""
        if self.architecture == "multiscale":
            return FlowModel.multiscale(m, tuple(self.widths), self.depth, seed=self.seed)
        if self.architecture == "single_scale":
            return FlowModel.single_scale(m, self.n_couplings, self.widths[0], self.depth, seed=self.seed)
        raise ValueError(f"unknown architecture {self.architecture!r}")

    def fit(self, X, y=None):
        noise = check_noise(X)
        cfg = TrainConfig(self.batch_size, self.epochs, self.learning_rate, self.seed,
                          validation_fraction=self.validation_fraction)
        self.flow_, self.history_ = train(self.build(noise.shape[1]), noise, cfg)
        self.n_features_in_ = 2 * noise.shape[1]
        return self

    def score_samples(self, X):
        check_is_fitted(self, "flow_")
        return self.flow_.log_prob(noise_to_flow(check_noise(X)))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))


class LearnedDiscrepancyReconstructor(_Reconstructor):
    """MAP reconstruction with a flow-learned noise model.

    ``fit(noise)`` trains ``density`` (a :class:`NoiseFlowDensity`) on the
    noise samples unless a trained ``flow`` is supplied, in which case
    ``fit`` needs no data. The descent starts from regularized Kaczmarz with
    ``rk_alpha`` (default: ``alpha``) and ``rk_sweeps``.
    """

    def __init__(self, operator=None, alpha=1.0, flow=None, density=None, step_size=1.0,
                 max_iterations=2000, backtracking=True, init="rk", rk_alpha=None, rk_sweeps=10):
        self.operator = operator
        self.alpha = alpha
        self.flow = flow
        self.density = density
        self.step_size = step_size
        self.max_iterations = max_iterations
        self.backtracking = backtracking
        self.init = init
        self.rk_alpha = rk_alpha
        self.rk_sweeps = rk_sweeps

    def fit(self, X=None, y=None):
        self._prepare()
        if self.flow is not None:
            self.flow_ = self.flow
        else:
            if X is None:
                raise ValueError("noise samples are required to train the discrepancy flow")
            density = copy.deepcopy(self.density) if self.density is not None else NoiseFlowDensity()
            self.flow_ = density.fit(X).flow_
        if self.flow_.input_shape != (2, self.system_.n_measurements // 2):
            raise ValueError("flow input shape does not match the operator")
        return self

    def config(self):
        rk_alpha = self.alpha if self.rk_alpha is None else self.rk_alpha
        return LdaConfig(self.alpha, self.step_size, self.max_iterations, self.backtracking,
                         self.init, SolverConfig(rk_alpha, self.rk_sweeps))

    def _solve(self, Y):
        check_is_fitted(self, "flow_")
        x, self.trace_ = lda_reconstruct(self.flow_, self.system_, Y, self.config())
        return x
