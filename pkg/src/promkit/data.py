"""Snapshot containers, parameter points and observable lifts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError

LIFT_KINDS = ("identity", "affine", "stack", "hermite")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ParameterPoint:
    """A point in parameter space, e.g. a velocity or a viscosity."""

    values: tuple[float, ...]

    def __init__(self, values: float | Sequence[float] | np.ndarray):
        vals = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)).ravel())
        if len(vals) == 0:
            raise ConfigError("parameter point needs at least one component")
        if not all(np.isfinite(vals)):
            raise ConfigError(f"non-finite parameter values {vals}")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def __repr__(self) -> str:
        return f"ParameterPoint({list(self.values)})"


@dataclass(frozen=True)
class SnapshotSet:
    """Trajectory of QoI column vectors at one parameter point.

    Column ``k`` of ``data`` holds Q(t0 + k*dt).
    """

    data: np.ndarray
    t0: float
    dt: float
    parameter: ParameterPoint
    qoi_names: tuple[str, ...] = ()

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2:
            raise ConfigError(f"snapshot matrix must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 2:
            raise ConfigError(f"need >= 1 row and >= 2 columns, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigError("snapshot matrix contains NaN or Inf")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        param = self.parameter
        if not isinstance(param, ParameterPoint):
            param = ParameterPoint(param)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "parameter", param)
        object.__setattr__(self, "qoi_names", tuple(self.qoi_names))

    @property
    def qoi_dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_snap(self) -> int:
        """Number of transitions, i.e. columns minus one."""
        return self.data.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.data.shape[1])

    def head(self, n_snap: int) -> "SnapshotSet":
        """The first ``n_snap + 1`` columns."""
        if not 1 <= n_snap <= self.n_snap:
            raise ConfigError(f"n_snap={n_snap} outside [1, {self.n_snap}]")
        return SnapshotSet(self.data[:, : n_snap + 1], self.t0, self.dt, self.parameter, self.qoi_names)


def hermite_he(x: np.ndarray, order: int) -> np.ndarray:
    """Probabilists' Hermite polynomials He_0..He_{order-1} evaluated at ``x``.

    Returns an array of shape ``(order,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((order,) + x.shape)
    out[0] = 1.0
    if order > 1:
        out[1] = x
    for n in range(1, order - 1):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


@dataclass(frozen=True)
class ObservableLift:
    """Map g from QoI space to observable space, together with its inverse.

    Use the constructors :meth:`identity`, :meth:`affine`, :meth:`stack` and
    :meth:`hermite` rather than the raw initializer.
    """

    kind: str
    qoi_dim: int
    parts: tuple[int, ...] = ()
    order: int = 0
    mean: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in LIFT_KINDS:
            raise ConfigError(f"unknown lift kind {self.kind!r}")
        if self.qoi_dim < 1:
            raise ConfigError("qoi_dim must be positive")
        if self.kind == "stack":
            if not self.parts or any(p < 1 for p in self.parts) or sum(self.parts) != self.qoi_dim:
                raise ConfigError(f"stack parts {self.parts} do not sum to qoi_dim={self.qoi_dim}")
        if self.kind == "hermite":
            if self.qoi_dim != 1:
                raise ConfigError("Hermite lift needs a scalar QoI")
            if self.order < 1:
                raise ConfigError("Hermite order must be >= 1")
            if not (self.scale > 0 and np.isfinite(self.scale)) or not np.isfinite(self.mean):
                raise ConfigError(f"Hermite scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls, qoi_dim: int) -> "ObservableLift":
        return cls("identity", int(qoi_dim))

    @classmethod
    def affine(cls, qoi_dim: int) -> "ObservableLift":
        return cls("affine", int(qoi_dim))

    @classmethod
    def stack(cls, parts: Sequence[int]) -> "ObservableLift":
        parts = tuple(int(p) for p in parts)
        return cls("stack", sum(parts), parts=parts)

    @classmethod
    def hermite(cls, order: int, mean: float = 0.0, scale: float = 1.0) -> "ObservableLift":
        return cls("hermite", 1, order=int(order), mean=float(mean), scale=float(scale))

    @classmethod
    def hermite_from_data(cls, order: int, series: np.ndarray) -> "ObservableLift":
        """Hermite lift normalized by the mean and standard deviation of ``series``."""
        series = np.asarray(series, dtype=float).ravel()
        std = float(series.std())
        return cls.hermite(order, float(series.mean()), std if std > 0 else 1.0)

    @property
    def observable_dim(self) -> int:
        if self.kind == "identity":
            return self.qoi_dim
        if self.kind in ("affine", "stack"):
            return self.qoi_dim + 1
        return self.order

    def lift(self, q: np.ndarray) -> np.ndarray:
        """Apply g to a QoI vector, or column-wise to a QoI matrix."""
        q = np.asarray(q, dtype=float)
        if q.shape[0] != self.qoi_dim:
            raise ConfigError(f"QoI dimension {q.shape[0]} does not match lift ({self.qoi_dim})")
        if not np.all(np.isfinite(q)):
            raise ConfigError("non-finite QoI values")
        if self.kind == "identity":
            return q.copy()
        if self.kind in ("affine", "stack"):
            ones = np.ones((1,) + q.shape[1:])
            return np.concatenate([ones, q], axis=0)
        xhat = (q[0] - self.mean) / self.scale
        return hermite_he(xhat, self.order)

    def unlift(self, y: np.ndarray) -> np.ndarray:
        """Apply g^{-1}; accepts a vector or a matrix of observable columns."""
        y = np.asarray(y)
        if y.shape[0] != self.observable_dim:
            raise ConfigError(f"observable dimension {y.shape[0]} != {self.observable_dim}")
        if self.kind == "identity":
            return y.copy()
        if self.kind in ("affine", "stack"):
            return y[1:].copy()
        if self.order < 2:
            raise ConfigError("Hermite lift of order < 2 has no He_1 slot to invert")
        return self.mean + self.scale * y[1:2]

    def split(self, q: np.ndarray) -> list[np.ndarray]:
        """Split a stacked QoI vector into its components."""
        if self.kind != "stack":
            return [np.asarray(q)]
        return np.split(np.asarray(q), np.cumsum(self.parts)[:-1], axis=0)

    def drift(self, y: np.ndarray) -> float:
        """max |y_0 - 1| over columns for affine/stack lifts (0 otherwise)."""
        if self.kind not in ("affine", "stack"):
            return 0.0
        y = np.asarray(y)
        return float(np.max(np.abs(y[0] - 1.0)))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "qoi_dim": self.qoi_dim}
        if self.kind == "stack":
            d["parts"] = list(self.parts)
        if self.kind == "hermite":
            d.update(order=self.order, mean=self.mean, scale=self.scale)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObservableLift":
        kind = d["kind"]
        if kind == "stack":
            return cls.stack(d["parts"])
        if kind == "hermite":
            return cls.hermite(d["order"], d.get("mean", 0.0), d.get("scale", 1.0))
        if kind not in LIFT_KINDS:
            raise ConfigError(f"unknown lift kind {kind!r}")
        return cls(kind, int(d["qoi_dim"]))


def lift_observables(lift: ObservableLift, q: np.ndarray) -> np.ndarray:
    return lift.lift(q)


def unlift_observables(lift: ObservableLift, y: np.ndarray) -> np.ndarray:
    return lift.unlift(y)
