"""Online step: interpolation of bases and reduced operators on manifolds.

Bases are interpolated on the Grassmann manifold through the log/exp maps
at a reference subspace. Reduced operators are first brought into
consistent coordinates by orthogonal Procrustes alignment and then
interpolated in a chart of a matrix manifold (euclidean, nonsingular or
SPD matrices).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.interpolate
import scipy.linalg

from .data import ParameterPoint
from .errors import ConfigError, NumericalError

log = logging.getLogger(__name__)

SCHEMES = ("piecewise_linear", "lagrange", "cubic_spline")
MANIFOLDS = ("euclidean", "gl_nonsingular", "spd")

LOG_CHART_TOL = 1e-10
PROCRUSTES_TOL = 1e-12
IMAG_RESIDUE_TOL = 1e-8


@dataclass(frozen=True)
class InterpolationConfig:
    scheme: str = "piecewise_linear"
    neighborhood: str | int = "all"  # "all" or k for k-nearest
    reference: str | int = "nearest"  # "nearest" or a fixed training index
    operator_manifold: str = "gl_nonsingular"
    extrapolation: str = "error"  # or "warn"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.operator_manifold not in MANIFOLDS:
            raise ConfigError(f"unknown operator manifold {self.operator_manifold!r}")
        if self.extrapolation not in ("error", "warn"):
            raise ConfigError(f"extrapolation must be 'error' or 'warn'")
        if self.neighborhood != "all" and (not isinstance(self.neighborhood, int) or self.neighborhood < 2):
            raise ConfigError("k_nearest neighborhood needs an integer k >= 2")
        if self.reference != "nearest" and not isinstance(self.reference, int):
            raise ConfigError("reference must be 'nearest' or an integer index")

    @classmethod
    def from_dict(cls, d: dict | None) -> "InterpolationConfig":
        d = dict(d or {})
        unknown = set(d) - {"scheme", "neighborhood", "reference", "operator_manifold", "extrapolation"}
        if unknown:
            raise ConfigError(f"unknown interpolation keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "neighborhood": self.neighborhood,
            "reference": self.reference,
            "operator_manifold": self.operator_manifold,
            "extrapolation": self.extrapolation,
        }


# -- Grassmann charts --------------------------------------------------------


def grassmann_log(V0: np.ndarray, Vi: np.ndarray, P: np.ndarray | None = None) -> np.ndarray:
    """Tangent matrix at range(V0) pointing to range(Vi).

    ``(I - V0 V0^T) Vi P^{-1} = U Omega W^T`` and ``Gamma = U atan(Omega) W^T``
    with ``P = V0^T Vi``.
    """
    if P is None:
        P = V0.T @ Vi
    if np.linalg.svd(P, compute_uv=False).min() <= LOG_CHART_TOL:
        raise NumericalError("subspace outside log-chart domain (V0^T Vi is singular)")
    M = Vi - V0 @ P
    M = np.linalg.solve(P.T, M.T).T
    u, omega, wt = np.linalg.svd(M, full_matrices=False)
    return (u * np.arctan(omega)) @ wt


def grassmann_exp(V0: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Point on the geodesic from range(V0) with initial velocity ``gamma``.

    Returns ``V0 W cos(Omega) W^T + U sin(Omega) W^T`` where
    ``gamma = U Omega W^T``; the trailing ``W^T`` keeps the result in
    coordinates continuous with V0.
    """
    if gamma.shape != V0.shape:
        raise ConfigError(f"tangent shape {gamma.shape} != basis shape {V0.shape}")
    if not np.any(gamma):
        return V0.copy()
    u, omega, wt = np.linalg.svd(gamma, full_matrices=False)
    return (V0 @ wt.T * np.cos(omega) + u * np.sin(omega)) @ wt


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles between range(A) and range(B) for orthonormal A, B."""
    return scipy.linalg.subspace_angles(A, B)


# -- operator charts ---------------------------------------------------------


def _check_principal_log_domain(M: np.ndarray) -> None:
    ev = np.linalg.eigvals(M)
    scale = max(np.max(np.abs(ev)), 1e-300)
    bad = (ev.real <= 0) & (np.abs(ev.imag) <= 1e-12 * scale)
    if np.any(bad):
        raise NumericalError("spectrum touches the closed negative real axis; no principal logarithm")


def _sqrtm_spd(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, Q = np.linalg.eigh(X)
    if np.any(w <= 0):
        raise NumericalError("matrix is not symmetric positive definite")
    s = np.sqrt(w)
    return (Q * s) @ Q.T, (Q / s) @ Q.T


def _check_spd(X: np.ndarray) -> None:
    if not np.allclose(X, X.T, rtol=1e-12, atol=1e-14 * np.max(np.abs(X))):
        raise NumericalError("matrix is not symmetric")
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite") from exc


def _realify(a: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(a) and np.max(np.abs(a.imag), initial=0.0) <= 1e-13 * max(np.max(np.abs(a)), 1e-300):
        return a.real.copy()
    return a


def matrix_log_map(X0: np.ndarray, Xi: np.ndarray, manifold: str = "gl_nonsingular") -> np.ndarray:
    if manifold == "euclidean":
        return Xi - X0
    if manifold == "gl_nonsingular":
        M = np.linalg.solve(X0.T, Xi.T).T  # Xi X0^{-1}
        _check_principal_log_domain(M)
        return _realify(scipy.linalg.logm(M))
    if manifold == "spd":
        _check_spd(X0)
        _check_spd(Xi)
        _, inv_half = _sqrtm_spd(X0)
        C = inv_half @ Xi @ inv_half
        w, Q = np.linalg.eigh((C + C.T) / 2)
        return (Q * np.log(w)) @ Q.T
    raise ConfigError(f"unknown manifold {manifold!r}")


def matrix_exp_map(X0: np.ndarray, gamma: np.ndarray, manifold: str = "gl_nonsingular") -> np.ndarray:
    if manifold == "euclidean":
        return X0 + gamma
    if manifold == "gl_nonsingular":
        if not np.any(gamma):
            return X0.copy()
        return _realify(scipy.linalg.expm(gamma)) @ X0
    if manifold == "spd":
        if not np.any(gamma):
            return X0.copy()
        half, _ = _sqrtm_spd(X0)
        g = (gamma + gamma.T) / 2
        w, Q = np.linalg.eigh(g)
        return half @ ((Q * np.exp(w)) @ Q.T) @ half
    raise ConfigError(f"unknown manifold {manifold!r}")


# -- entrywise interpolation -------------------------------------------------


def _weights_1d(nodes: np.ndarray, x: float, scheme: str) -> np.ndarray:
    """Weights w with f(x) ~ sum_i w_i f(nodes_i); nodes sorted ascending."""
    n = len(nodes)
    hit = np.flatnonzero(nodes == x)
    if hit.size:
        w = np.zeros(n)
        w[hit[0]] = 1.0
        return w
    if n == 1:
        return np.ones(1)
    if scheme == "piecewise_linear":
        j = int(np.clip(np.searchsorted(nodes, x) - 1, 0, n - 2))
        t = (x - nodes[j]) / (nodes[j + 1] - nodes[j])
        w = np.zeros(n)
        w[j], w[j + 1] = 1.0 - t, t
        return w
    if scheme == "lagrange":
        w = np.ones(n)
        for i in range(n):
            for k in range(n):
                if k != i:
                    w[i] *= (x - nodes[k]) / (nodes[i] - nodes[k])
        return w
    if scheme == "cubic_spline":
        if n == 2:
            return _weights_1d(nodes, x, "piecewise_linear")
        spline = scipy.interpolate.CubicSpline(nodes, np.eye(n), axis=0, bc_type="natural")
        return spline(x)
    raise ConfigError(f"unknown scheme {scheme!r}")


def _grid_axes(params: np.ndarray) -> list[np.ndarray]:
    axes = [np.unique(params[:, d]) for d in range(params.shape[1])]
    if np.prod([len(a) for a in axes]) != len(params) or len({tuple(p) for p in params}) != len(params):
        raise ConfigError("multivariate training parameters must form a full tensor grid")
    return axes


def interpolation_weights(
    params: np.ndarray, target: np.ndarray, scheme: str = "piecewise_linear", extrapolation: str = "error"
) -> np.ndarray:
    """Linear weights over training points for the configured scheme.

    Every provided scheme is linear in the data, so interpolating a stack of
    matrices entry by entry reduces to one weighted sum.
    """
    target = np.atleast_1d(np.asarray(target, dtype=float))
    params = np.asarray(params, dtype=float).reshape(-1, target.size)
    if params.shape[1] > 3:
        raise ConfigError("entrywise interpolation supports at most 3 parameters")
    lo, hi = params.min(axis=0), params.max(axis=0)
    if np.any(target < lo) or np.any(target > hi):
        msg = f"target {target.tolist()} outside training range [{lo.tolist()}, {hi.tolist()}]"
        if extrapolation == "error":
            raise ConfigError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    if len(params) == 1:
        return np.ones(1)
    axes = _grid_axes(params)
    axis_weights = [_weights_1d(a, target[d], scheme) for d, a in enumerate(axes)]
    w = np.empty(len(params))
    for n, p in enumerate(params):
        w[n] = np.prod([axis_weights[d][np.searchsorted(axes[d], p[d])] for d in range(len(axes))])
    return w


def interpolate_entrywise(
    points: Sequence[tuple[ParameterPoint, np.ndarray]],
    target: ParameterPoint,
    cfg: InterpolationConfig | None = None,
) -> np.ndarray:
    cfg = cfg or InterpolationConfig()
    if not points:
        raise ConfigError("nothing to interpolate")
    params = np.array([p.values for p, _ in points])
    w = interpolation_weights(params, target.as_array(), cfg.scheme, cfg.extrapolation)
    return _weighted_sum(w, [g for _, g in points])


def _weighted_sum(w: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    hit = np.flatnonzero(w == 1.0)
    if hit.size == 1 and np.count_nonzero(w) == 1:
        return np.array(mats[hit[0]], copy=True)
    out = np.zeros_like(mats[0], dtype=np.result_type(*mats, float))
    for wi, m in zip(w, mats):
        if wi != 0.0:
            out += wi * m
    return out


# -- reference and neighborhood ----------------------------------------------


def _normalized(params: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    span = params.max(axis=0) - params.min(axis=0)
    span[span == 0] = 1.0
    return params / span, target / span


def select_neighborhood(params: np.ndarray, target: np.ndarray, cfg: InterpolationConfig) -> np.ndarray:
    """Indices of training points used for interpolation, in input order."""
    n = len(params)
    if cfg.neighborhood == "all" or cfg.neighborhood >= n:
        return np.arange(n)
    if params.shape[1] != 1:
        raise ConfigError("k_nearest neighborhoods are only supported for a scalar parameter")
    p, t = _normalized(params, target)
    d = np.linalg.norm(p - t, axis=1)
    return np.sort(np.argsort(d, kind="stable")[: cfg.neighborhood])


def select_reference(params: np.ndarray, target: np.ndarray, cfg: InterpolationConfig, members: np.ndarray) -> int:
    if cfg.reference != "nearest":
        i0 = int(cfg.reference)
        if i0 not in set(members.tolist()):
            raise ConfigError(f"reference index {i0} not in the interpolation neighborhood")
        return i0
    p, t = _normalized(params, target)
    d = np.linalg.norm(p - t, axis=1)
    # ties go to the smallest parameter so the choice is order independent
    return int(min(members, key=lambda i: (d[i], tuple(params[i]))))


# -- ensemble-level operations ------------------------------------------------


def interpolate_basis(
    bases: Sequence[np.ndarray],
    gram: np.ndarray,
    params: np.ndarray,
    target: ParameterPoint,
    cfg: InterpolationConfig | None = None,
) -> np.ndarray:
    """Grassmann interpolation of reduced-order bases."""
    cfg = cfg or InterpolationConfig()
    params = np.asarray(params, dtype=float).reshape(len(bases), -1)
    t = target.as_array()
    members = select_neighborhood(params, t, cfg)
    i0 = select_reference(params, t, cfg, members)
    V0 = bases[i0]
    tangents = []
    for i in members:
        if i == i0:
            tangents.append(np.zeros_like(V0))
        else:
            tangents.append(grassmann_log(V0, bases[i], gram[i0, i]))
    w = interpolation_weights(params[members], t, cfg.scheme, cfg.extrapolation)
    return grassmann_exp(V0, _weighted_sum(w, tangents))


def procrustes_rotation(P: np.ndarray) -> np.ndarray:
    """Q = U Z^T from the SVD P = U Sigma Z^T."""
    u, s, vt = np.linalg.svd(P)
    if s.min() < PROCRUSTES_TOL:
        raise NumericalError(f"alignment ill-posed: Gram block singular value {s.min():.3e}")
    return u @ vt


def procrustes_align(
    operators: Sequence[np.ndarray], gram: np.ndarray, i0: int, indices: Sequence[int] | None = None
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Congruence-transform local operators into the coordinates of sample ``i0``.

    Returns ``(rotations, aligned)`` for the requested indices.
    """
    indices = range(len(operators)) if indices is None else indices
    rotations, aligned = [], []
    for i in indices:
        if i == i0:
            Q = np.eye(operators[i].shape[0])
            rotations.append(Q)
            aligned.append(np.array(operators[i], copy=True))
            continue
        Q = procrustes_rotation(gram[i, i0])
        rotations.append(Q)
        aligned.append(Q.T @ operators[i] @ Q)
    return rotations, aligned


def interpolate_operator(
    operators: Sequence[np.ndarray],
    gram: np.ndarray,
    params: np.ndarray,
    target: ParameterPoint,
    cfg: InterpolationConfig | None = None,
) -> np.ndarray:
    """Procrustes alignment followed by chart interpolation of operators.

    On the nonsingular-matrix chart a failed principal-log precondition
    falls back to the euclidean chart with a warning.
    """
    cfg = cfg or InterpolationConfig()
    params = np.asarray(params, dtype=float).reshape(len(operators), -1)
    t = target.as_array()
    members = select_neighborhood(params, t, cfg)
    i0 = select_reference(params, t, cfg, members)
    _, aligned = procrustes_align(operators, gram, i0, members)
    ref = aligned[list(members).index(i0)]
    w = interpolation_weights(params[members], t, cfg.scheme, cfg.extrapolation)
    if np.count_nonzero(w) == 1:
        return np.array(aligned[int(np.flatnonzero(w)[0])], copy=True)

    manifold = cfg.operator_manifold
    try:
        tangents = [
            np.zeros_like(ref) if i == i0 else matrix_log_map(ref, K, manifold) for i, K in zip(members, aligned)
        ]
    except NumericalError as exc:
        if manifold != "gl_nonsingular":
            raise
        warnings.warn(f"{exc}; falling back to the euclidean chart", RuntimeWarning, stacklevel=2)
        log.info("operator interpolation fell back to euclidean chart: %s", exc)
        manifold = "euclidean"
        tangents = [K - ref for K in aligned]
    out = matrix_exp_map(ref, _weighted_sum(w, tangents), manifold)
    if np.iscomplexobj(out):
        residue = np.max(np.abs(out.imag))
        if residue > IMAG_RESIDUE_TOL * np.linalg.norm(out):
            raise NumericalError(f"interpolated operator has imaginary residue {residue:.3e}")
        out = out.real.copy()
    return out


def interpolate_vectors(
    vectors: Sequence[np.ndarray],
    gram: np.ndarray,
    params: np.ndarray,
    target: ParameterPoint,
    cfg: InterpolationConfig | None = None,
) -> np.ndarray:
    """Align reduced vectors (e.g. POD forcing terms) and interpolate them linearly."""
    cfg = cfg or InterpolationConfig()
    params = np.asarray(params, dtype=float).reshape(len(vectors), -1)
    t = target.as_array()
    members = select_neighborhood(params, t, cfg)
    i0 = select_reference(params, t, cfg, members)
    rotations = [np.eye(len(vectors[i])) if i == i0 else procrustes_rotation(gram[i, i0]) for i in members]
    aligned = [Q.T @ vectors[i] for Q, i in zip(rotations, members)]
    w = interpolation_weights(params[members], t, cfg.scheme, cfg.extrapolation)
    return _weighted_sum(w, aligned)


def interpolate_rob(ensemble, target: ParameterPoint, cfg: InterpolationConfig | None = None) -> np.ndarray:
    return interpolate_basis(ensemble.bases, ensemble.gram, ensemble.parameters, target, cfg)


def interpolate_prom(ensemble, target: ParameterPoint, cfg: InterpolationConfig | None = None) -> np.ndarray:
    return interpolate_operator(ensemble.operators, ensemble.gram, ensemble.parameters, target, cfg)
