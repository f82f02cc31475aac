"""Offline step: local DMD surrogates on lifted observables."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ObservableLift, ParameterPoint, SnapshotSet
from .errors import ConfigError, NumericalError

# Relative threshold below which a singular value counts as numerically zero.
RANK_TOL = 1e-13


def thin_svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD with a deterministic sign convention.

    The entry of largest magnitude in every left singular vector is made
    positive; the matching right singular vector is flipped with it.
    """
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, s, vt * signs[:, None]


def numerical_rank(singular_values: np.ndarray, tol: float = RANK_TOL) -> int:
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


@dataclass(frozen=True)
class RankPolicy:
    """``fixed(r)`` or ``energy(eps)`` truncation rule."""

    kind: str
    value: float

    @classmethod
    def fixed(cls, r: int) -> "RankPolicy":
        if int(r) < 1:
            raise ConfigError("rank must be >= 1")
        return cls("fixed", int(r))

    @classmethod
    def energy(cls, eps: float) -> "RankPolicy":
        if not 0 <= eps < 1:
            raise ConfigError("energy tolerance must be in [0, 1)")
        return cls("energy", float(eps))

    @classmethod
    def from_dict(cls, d: dict) -> "RankPolicy":
        kind = d.get("policy", "fixed")
        if kind == "fixed":
            return cls.fixed(d["r"])
        if kind == "energy":
            return cls.energy(d["eps"])
        raise ConfigError(f"unknown rank policy {kind!r}")

    def to_dict(self) -> dict:
        return {"policy": self.kind, ("r" if self.kind == "fixed" else "eps"): self.value}


def select_rank(singular_values: np.ndarray, policy: RankPolicy) -> int:
    s = np.asarray(singular_values, dtype=float)
    if np.any(np.diff(s) > 0) or np.any(s < 0):
        raise ConfigError("singular values must be nonnegative and nonincreasing")
    cap = numerical_rank(s)
    if cap == 0:
        raise NumericalError("all singular values are zero")
    if policy.kind == "fixed":
        return min(int(policy.value), cap)
    energy = np.cumsum(s**2) / np.sum(s**2)
    r = int(np.searchsorted(energy, 1.0 - policy.value - 1e-15) + 1)
    return min(r, cap)


def assemble_shift_matrices(s: SnapshotSet, lift: ObservableLift) -> tuple[np.ndarray, np.ndarray]:
    if s.data.shape[1] < 2:
        raise ConfigError("need at least two snapshots")
    y = lift.lift(s.data)
    return y[:, :-1], y[:, 1:]


@dataclass(frozen=True)
class LocalROM:
    parameter: ParameterPoint
    V: np.ndarray
    K: np.ndarray
    singular_values: np.ndarray
    lift: ObservableLift

    @property
    def rank(self) -> int:
        return self.K.shape[0]

    def orthonormality_defect(self) -> float:
        return float(np.max(np.abs(self.V.T @ self.V - np.eye(self.rank))))


def _fit_from_shift(Y1, Y2, r, parameter, lift, svd=None) -> LocalROM:
    n, m = Y1.shape
    if not 1 <= r <= min(n, m):
        raise ConfigError(f"rank {r} must lie in [1, min(N={n}, N_snap={m})]")
    u, s, vt = svd if svd is not None else thin_svd(Y1)
    if s[0] <= 0 or s[r - 1] / s[0] < RANK_TOL:
        raise NumericalError(f"Sigma numerically singular at rank {r} (sigma_r/sigma_1 = {s[r - 1] / max(s[0], 1e-300):.3e})")
    V = u[:, :r]
    K = (V.T @ Y2) @ (vt[:r].T / s[:r])
    return LocalROM(parameter, V, K, s.copy(), lift)


def fit_local_rom(s: SnapshotSet, lift: ObservableLift, r: int) -> LocalROM:
    """Rank-``r`` DMD on the lifted snapshots of one trajectory.

    ``K_r = V^T Y2 Z Sigma^{-1}`` with ``Y1 ~ V Sigma Z^T``.
    """
    Y1, Y2 = assemble_shift_matrices(s, lift)
    return _fit_from_shift(Y1, Y2, r, s.parameter, lift)


def gram_table(bases: Sequence[np.ndarray]) -> np.ndarray:
    """All ``P[i, j] = V_i^T V_j`` as an array of shape (n, n, r, r)."""
    n = len(bases)
    r = bases[0].shape[1]
    gram = np.empty((n, n, r, r))
    for i in range(n):
        for j in range(i, n):
            gram[i, j] = bases[i].T @ bases[j]
            gram[j, i] = gram[i, j].T
    return gram


class TrainedEnsemble:
    """Local ROMs at all training parameters plus their Gram table."""

    def __init__(self, roms: Sequence[LocalROM], gram: np.ndarray | None = None):
        roms = list(roms)
        if not roms:
            raise ConfigError("empty ensemble")
        shape = roms[0].V.shape
        for rom in roms[1:]:
            if rom.V.shape != shape:
                raise ConfigError("all local bases must share shape N x r")
            if rom.lift != roms[0].lift:
                raise ConfigError("all local ROMs must share the observable lift")
        self.roms = roms
        self.gram = gram_table([r.V for r in roms]) if gram is None else np.asarray(gram)

    @property
    def rank(self) -> int:
        return self.roms[0].rank

    @property
    def observable_dim(self) -> int:
        return self.roms[0].V.shape[0]

    @property
    def lift(self) -> ObservableLift:
        return self.roms[0].lift

    @property
    def parameters(self) -> np.ndarray:
        """Training parameters as an (N_MC, N_par) array."""
        return np.array([r.parameter.values for r in self.roms])

    @property
    def bases(self) -> list[np.ndarray]:
        return [r.V for r in self.roms]

    @property
    def operators(self) -> list[np.ndarray]:
        return [r.K for r in self.roms]

    def __len__(self) -> int:
        return len(self.roms)

    def storage_count(self) -> int:
        """Stored numbers: (N r + r^2 + r^2 (N_MC + 1)/2) N_MC."""
        n, r, m = self.observable_dim, self.rank, len(self.roms)
        return n * r * m + r * r * m + r * r * m * (m + 1) // 2

    def gram_defect(self) -> float:
        fresh = gram_table(self.bases)
        return float(np.max(np.abs(fresh - self.gram)))


def resolve_shared_rank(singular_values: Sequence[np.ndarray], policy: RankPolicy) -> int:
    """Per-sample rank selection, then the maximum over samples."""
    return max(select_rank(s, policy) for s in singular_values)


def train_ensemble(
    datasets: Sequence[SnapshotSet],
    lift: ObservableLift,
    rank_policy: RankPolicy | int,
    max_workers: int = 1,
) -> TrainedEnsemble:
    if len(datasets) < 2:
        raise ConfigError("need at least two training datasets")
    shapes = {d.qoi_dim for d in datasets}
    if len(shapes) != 1:
        raise ConfigError(f"inconsistent QoI dimensions {sorted(shapes)}")
    params = [d.parameter for d in datasets]
    if len(set(params)) != len(params):
        raise ConfigError("duplicate training parameter points")
    if isinstance(rank_policy, int):
        rank_policy = RankPolicy.fixed(rank_policy)

    shifts = [assemble_shift_matrices(d, lift) for d in datasets]
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        svds = list(pool.map(lambda yy: thin_svd(yy[0]), shifts))
    r = resolve_shared_rank([s for _, s, _ in svds], rank_policy)
    roms = [
        _fit_from_shift(Y1, Y2, r, d.parameter, lift, svd)
        for (Y1, Y2), svd, d in zip(shifts, svds, datasets)
    ]
    return TrainedEnsemble(roms)
