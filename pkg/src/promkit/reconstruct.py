"""Iteration-free trajectory reconstruction and the full online prediction."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import ObservableLift, ParameterPoint
from .errors import NumericalError
from .manifold import InterpolationConfig, interpolate_prom, interpolate_rob

EIGVEC_COND_MAX = 1e12
IMAG_TOL = 1e-6


@dataclass(frozen=True)
class SpectralForm:
    eigenvalues: np.ndarray
    modes: np.ndarray
    amplitudes: np.ndarray
    eigvec_cond: float


@dataclass
class PredictedTrajectory:
    qoi: np.ndarray
    parameter: ParameterPoint
    diagnostics: dict = field(default_factory=dict)
    method: str = "dmd"

    def to_snapshot(self, t0: float = 0.0, dt: float = 1.0, qoi_names=()):
        from .data import SnapshotSet

        return SnapshotSet(self.qoi, t0, dt, self.parameter, qoi_names)


def iterate_observables(K: np.ndarray, V: np.ndarray, y0: np.ndarray, n_steps: int) -> np.ndarray:
    """Direct route: q_{k+1} = K q_k from q_0 = V^T y_0, and y_k = V q_k."""
    q = np.empty((K.shape[0], n_steps + 1))
    q[:, 0] = V.T @ y0
    for k in range(n_steps):
        q[:, k + 1] = K @ q[:, k]
    return V @ q


def spectral_form(K: np.ndarray, V: np.ndarray, y0: np.ndarray) -> SpectralForm:
    lam, psi = np.linalg.eig(K)
    cond = float(np.linalg.cond(psi))
    phi = V @ psi
    # Phi is N x r; its "inverse" is read as the least-squares pseudo-inverse.
    omega = np.linalg.lstsq(phi, y0.astype(complex), rcond=None)[0]
    return SpectralForm(lam, phi, omega, cond)


def reconstruct_observables(
    K: np.ndarray, V: np.ndarray, y0: np.ndarray, n_steps: int
) -> tuple[SpectralForm, np.ndarray, dict]:
    """Observable trajectory ``y_k = Phi Lambda^k omega`` for k = 0..n_steps.

    Returns the spectral form, the real observable matrix and a diagnostics
    dict. A defective operator (ill-conditioned eigenvectors) falls back to
    direct iteration with a warning.
    """
    y0 = np.asarray(y0, dtype=float)
    sf = spectral_form(K, V, y0)
    diag = {
        "spectral_radius": float(np.max(np.abs(sf.eigenvalues))),
        "eigvec_cond": sf.eigvec_cond,
        "route": "spectral",
        "max_imag_residue": 0.0,
    }
    if not np.isfinite(sf.eigvec_cond) or sf.eigvec_cond >= EIGVEC_COND_MAX:
        warnings.warn(
            f"reduced operator is numerically defective (cond={sf.eigvec_cond:.2e}); using direct iteration",
            RuntimeWarning,
            stacklevel=2,
        )
        diag["route"] = "iteration"
        return sf, iterate_observables(K, V, y0, n_steps), diag

    powers = sf.eigenvalues[:, None] ** np.arange(n_steps + 1)[None, :]
    Y = sf.modes @ (sf.amplitudes[:, None] * powers)
    scale = max(float(np.max(np.abs(Y.real))), 1e-300)
    residue = float(np.max(np.abs(Y.imag))) / scale
    diag["max_imag_residue"] = residue
    if residue > IMAG_TOL:
        raise NumericalError(f"reconstruction has imaginary residue {residue:.3e}")
    return sf, Y.real.copy(), diag


def predict_observables(
    V: np.ndarray, K: np.ndarray, lift: ObservableLift, q0: np.ndarray, n_steps: int
) -> tuple[np.ndarray, dict]:
    y0 = lift.lift(np.asarray(q0, dtype=float))
    _, Y, diag = reconstruct_observables(K, V, y0, n_steps)
    diag["affine_drift"] = lift.drift(Y)
    return lift.unlift(Y), diag


def predict_qoi_trajectory(
    ensemble,
    target: ParameterPoint | float,
    q0: np.ndarray,
    n_steps: int,
    cfg: InterpolationConfig | None = None,
) -> PredictedTrajectory:
    """Online prediction at an unseen parameter value."""
    if not isinstance(target, ParameterPoint):
        target = ParameterPoint(target)
    V = interpolate_rob(ensemble, target, cfg)
    K = interpolate_prom(ensemble, target, cfg)
    qoi, diag = predict_observables(V, K, ensemble.lift, q0, n_steps)
    return PredictedTrajectory(qoi, target, diag, "dmd")


def local_reconstruction(rom, q0: np.ndarray, n_steps: int) -> PredictedTrajectory:
    """Reconstruction with a single local ROM (no interpolation)."""
    qoi, diag = predict_observables(rom.V, rom.K, rom.lift, q0, n_steps)
    return PredictedTrajectory(qoi, rom.parameter, diag, "dmd-local")
