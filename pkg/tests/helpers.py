"""Small builders shared by several test modules."""

import numpy as np

from promkit.data import ObservableLift, SnapshotSet
from promkit.dmd import train_ensemble


def linear_trajectory(A, b, q0, n_steps, p, dt=1.0):
    Q = np.empty((len(q0), n_steps + 1))
    Q[:, 0] = q0
    for k in range(n_steps):
        Q[:, k + 1] = A @ Q[:, k] + b
    return SnapshotSet(Q, 0.0, dt, p)


def toy_ensemble(rng, n=12, r=3, params=(0.0, 1.0, 2.0), steps=30):
    """Affine-lifted linear systems whose matrices vary smoothly with p."""
    A0 = rng.standard_normal((n, n))
    A0 *= 0.6 / np.max(np.abs(np.linalg.eigvals(A0)))
    A1 = 0.05 * rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    q0 = rng.standard_normal(n)
    sets = [linear_trajectory(A0 + p * A1, b, q0, steps, p) for p in params]
    return train_ensemble(sets, ObservableLift.affine(n), r), sets
