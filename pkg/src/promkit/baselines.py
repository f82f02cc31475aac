"""Reference methods: POD-Galerkin PROM and per-entry Kriging."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .data import ParameterPoint, SnapshotSet
from .dmd import gram_table, thin_svd, RANK_TOL
from .errors import ConfigError, NumericalError
from .manifold import InterpolationConfig, interpolate_basis, interpolate_operator, interpolate_vectors
from .reconstruct import PredictedTrajectory


@dataclass(frozen=True)
class PodLocalROM:
    parameter: ParameterPoint
    V: np.ndarray
    A: np.ndarray
    b: np.ndarray


class PodEnsemble:
    def __init__(self, roms: Sequence[PodLocalROM]):
        self.roms = list(roms)
        self.gram = gram_table([r.V for r in self.roms])

    @property
    def parameters(self) -> np.ndarray:
        return np.array([r.parameter.values for r in self.roms])

    @property
    def rank(self) -> int:
        return self.roms[0].V.shape[1]


def galerkin_project(V: np.ndarray, operator) -> tuple[np.ndarray, np.ndarray]:
    """A_r = V^T A V and b_r = V^T b for an operator exposing ``matmat`` and ``b``."""
    return V.T @ operator.matmat(V), V.T @ operator.b


def pod_fit(datasets: Sequence[SnapshotSet], operators: Sequence, r: int) -> PodEnsemble:
    if len(datasets) != len(operators):
        raise ConfigError("need exactly one HFM operator per dataset")
    roms = []
    for s, op in zip(datasets, operators):
        if op.shape != (s.qoi_dim, s.qoi_dim):
            raise ConfigError(f"operator shape {op.shape} does not match QoI dimension {s.qoi_dim}")
        if r > min(s.data.shape):
            raise ConfigError(f"rank {r} exceeds snapshot matrix dimensions {s.data.shape}")
        u, sv, _ = thin_svd(s.data)
        if sv[r - 1] / sv[0] < RANK_TOL:
            raise NumericalError(f"snapshot matrix is numerically rank deficient at r={r}")
        V = u[:, :r]
        A, b = galerkin_project(V, op)
        roms.append(PodLocalROM(s.parameter, V, A, b))
    return PodEnsemble(roms)


def pod_iterate(V: np.ndarray, A: np.ndarray, b: np.ndarray, q0: np.ndarray, n_steps: int) -> np.ndarray:
    q = np.empty((A.shape[0], n_steps + 1))
    q[:, 0] = V.T @ q0
    for k in range(n_steps):
        q[:, k + 1] = A @ q[:, k] + b
    return V @ q


def pod_predict(
    ensemble: PodEnsemble,
    target: ParameterPoint | float,
    q0: np.ndarray,
    n_steps: int,
    cfg: InterpolationConfig | None = None,
) -> PredictedTrajectory:
    """Interpolate (V, A_r, b_r) and iterate the projected affine system.

    ``A_r`` goes through the same Procrustes + chart interpolation as the DMD
    operators; ``b_r`` is aligned and interpolated on the euclidean chart.
    """
    if not isinstance(target, ParameterPoint):
        target = ParameterPoint(target)
    params = ensemble.parameters
    V = interpolate_basis([r.V for r in ensemble.roms], ensemble.gram, params, target, cfg)
    A = interpolate_operator([r.A for r in ensemble.roms], ensemble.gram, params, target, cfg)
    b = interpolate_vectors([r.b for r in ensemble.roms], ensemble.gram, params, target, cfg)
    Q = pod_iterate(V, A, b, np.asarray(q0, dtype=float), n_steps)
    diag = {"spectral_radius": float(np.max(np.abs(np.linalg.eigvals(A))))}
    return PredictedTrajectory(Q, target, diag, "pod")


# -- Kriging -----------------------------------------------------------------------


@dataclass(frozen=True)
class KernelConfig:
    """Squared-exponential kernel; ``length=None`` means half the parameter range."""

    length: float | None = None
    nugget: float = 1e-10

    @classmethod
    def from_dict(cls, d: dict | None) -> "KernelConfig":
        return cls(**(d or {}))


class KrigingModel:
    """Independent 1-D GP regressions across parameters, one per (entry, time) pair.

    Every entry shares the correlation structure, so the posterior mean
    reduces to one weight vector over training samples applied to the
    centered data; the per-entry variance only scales the predictive
    variance.
    """

    def __init__(self, params: np.ndarray, data: np.ndarray, length: np.ndarray, nugget: float, t0: float, dt: float):
        self.params = params
        self.mean = data.mean(axis=0)
        self.centered = data - self.mean
        self.variance = data.var(axis=0)
        self.length = length
        self.nugget = nugget
        self.t0, self.dt = t0, dt
        R = self.correlation(params, params) + nugget * np.eye(len(params))
        try:
            self._chol = scipy.linalg.cho_factor(R, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("kernel matrix is not positive definite after nugget") from exc

    def correlation(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = (a[:, None, :] - b[None, :, :]) / self.length
        return np.exp(-0.5 * np.sum(d * d, axis=-1))

    def weights(self, target: np.ndarray) -> np.ndarray:
        k = self.correlation(np.atleast_2d(target), self.params)[0]
        return scipy.linalg.cho_solve(self._chol, k)

    def predict_mean(self, target: np.ndarray) -> np.ndarray:
        w = self.weights(target)
        return self.mean + np.tensordot(w, self.centered, axes=1)

    def predict_variance(self, target: np.ndarray) -> np.ndarray:
        k = self.correlation(np.atleast_2d(target), self.params)[0]
        reduction = 1.0 + self.nugget - k @ scipy.linalg.cho_solve(self._chol, k)
        return self.variance * max(reduction, 0.0)

    def hyperparameters(self) -> dict:
        return {
            "kernel": "squared_exponential",
            "length": self.length.tolist(),
            "nugget": self.nugget,
            "sigma2": "per-entry sample variance",
            "mean": "per-entry sample mean",
        }


def kriging_fit(datasets: Sequence[SnapshotSet], kernel: KernelConfig | None = None) -> KrigingModel:
    kernel = kernel or KernelConfig()
    if len(datasets) < 2:
        raise ConfigError("Kriging needs at least two training parameters")
    shapes = {d.data.shape for d in datasets}
    if len(shapes) != 1:
        raise ConfigError(f"training trajectories differ in shape: {sorted(shapes)}")
    params = np.array([d.parameter.values for d in datasets])
    data = np.stack([d.data for d in datasets])
    if kernel.length is None:
        span = params.max(axis=0) - params.min(axis=0)
        span[span == 0] = 1.0
        length = 0.5 * span
    else:
        length = np.full(params.shape[1], float(kernel.length))
    if np.any(length <= 0):
        raise ConfigError("kernel length scale must be positive")
    return KrigingModel(params, data, length, kernel.nugget, datasets[0].t0, datasets[0].dt)


def kriging_predict(model: KrigingModel, target: ParameterPoint | float) -> PredictedTrajectory:
    if not isinstance(target, ParameterPoint):
        target = ParameterPoint(target)
    Q = model.predict_mean(target.as_array())
    return PredictedTrajectory(Q, target, {}, "kriging")
