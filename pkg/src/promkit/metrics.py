"""Relative L2 error metrics between predicted and reference trajectories."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def _as_matrix(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", getattr(x, "qoi", x)), dtype=float)


def relative_l2_series(pred, ref) -> tuple[np.ndarray, np.ndarray]:
    """Per-step errors ||Q_pred(t_k) - Q_ref(t_k)|| / ||Q_ref(t_k)||.

    Returns ``(errors, absolute)``; where the reference column is zero the
    absolute error is reported and the flag is set.
    """
    P, R = _as_matrix(pred), _as_matrix(ref)
    if P.shape != R.shape:
        raise ConfigError(f"shape mismatch {P.shape} vs {R.shape}")
    num = np.linalg.norm(P - R, axis=0)
    den = np.linalg.norm(R, axis=0)
    absolute = den == 0
    return np.where(absolute, num, num / np.where(absolute, 1.0, den)), absolute


def total_relative_l2(pred, ref, include_initial: bool = False) -> float:
    """sqrt(sum_k ||dQ_k||^2) / sqrt(sum_k ||Q_ref,k||^2), k from 1 unless ``include_initial``."""
    P, R = _as_matrix(pred), _as_matrix(ref)
    if P.shape != R.shape:
        raise ConfigError(f"shape mismatch {P.shape} vs {R.shape}")
    start = 0 if include_initial else 1
    den = np.sum(R[:, start:] ** 2)
    if den == 0:
        raise ConfigError("reference trajectory has zero energy")
    return float(np.sqrt(np.sum((P[:, start:] - R[:, start:]) ** 2) / den))
