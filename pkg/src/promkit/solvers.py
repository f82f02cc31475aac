"""High-fidelity models used to generate training and reference data.

* 2-D advection-diffusion on the unit square (upwind advection, centered
  diffusion, implicit Euler), linear in the state: Q_{n+1} = A Q_n + b.
* 2-D diffusion on a square with a rectangular Dirichlet cavity, with flux
  and heat-rate post-processing.
* 1-D periodic viscous Burgers (explicit Godunov upwind + centered
  diffusion) as a nonlinear test problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .data import ParameterPoint, SnapshotSet
from .errors import ConfigError, NumericalError


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid on [0, lx] x [0, ly]; ``mask`` is a cavity rectangle (x0, x1, y0, y1)."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    mask: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ConfigError("grid needs at least 3 nodes per direction")
        if self.mask is not None:
            x0, x1, y0, y1 = self.mask
            hx, hy = self.hx, self.hy
            if not (hx <= x0 < x1 <= self.lx - hx and hy <= y0 < y1 <= self.ly - hy):
                raise ConfigError(f"cavity {self.mask} must lie strictly inside the domain")

    @property
    def hx(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (ny, nx) arrays; flat index is j * nx + i."""
        x = np.linspace(0.0, self.lx, self.nx)
        y = np.linspace(0.0, self.ly, self.ny)
        return np.meshgrid(x, y)

    def cavity_nodes(self) -> np.ndarray:
        """Nodes on or inside the cavity rectangle, shape (ny, nx)."""
        if self.mask is None:
            return np.zeros((self.ny, self.nx), dtype=bool)
        x0, x1, y0, y1 = self.mask
        X, Y = self.coords()
        eps = 1e-9 * max(self.hx, self.hy)
        return (X >= x0 - eps) & (X <= x1 + eps) & (Y >= y0 - eps) & (Y <= y1 + eps)

    def domain_nodes(self) -> np.ndarray:
        """Nodes of the physical domain: everything except the cavity interior."""
        if self.mask is None:
            return np.ones((self.ny, self.nx), dtype=bool)
        x0, x1, y0, y1 = self.mask
        X, Y = self.coords()
        eps = 1e-9 * max(self.hx, self.hy)
        inside = (X > x0 + eps) & (X < x1 - eps) & (Y > y0 + eps) & (Y < y1 - eps)
        return ~inside

    def cavity_index_box(self) -> tuple[int, int, int, int]:
        """Index range (i0, i1, j0, j1), inclusive, of the cavity rectangle."""
        x0, x1, y0, y1 = self.mask
        return (
            int(round(x0 / self.hx)),
            int(round(x1 / self.hx)),
            int(round(y0 / self.hy)),
            int(round(y1 / self.hy)),
        )


class LinearHFMOperator:
    """Affine one-step map Q_{n+1} = A Q_n + b of an implicit linear solver.

    ``A = M^{-1} R`` is dense, so it is kept in factored form: ``M`` is the
    sparse implicit matrix (LU-factorized once) and ``R`` the sparse
    right-hand-side map.
    """

    def __init__(self, M: sp.spmatrix, R: sp.spmatrix, c: np.ndarray):
        self.M = M.tocsc()
        self.R = R.tocsr()
        try:
            self._lu = spla.splu(self.M)
        except RuntimeError as exc:
            raise NumericalError(f"implicit system factorization failed: {exc}") from exc
        self.c = np.asarray(c, dtype=float)
        self.b = self._lu.solve(self.c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.M.shape

    def matmat(self, X: np.ndarray) -> np.ndarray:
        """A @ X."""
        return self._lu.solve(np.asarray(self.R @ X, dtype=float))

    def apply(self, q: np.ndarray) -> np.ndarray:
        """A q + b, evaluated as one solve M^{-1}(R q + c).

        Adding ``matmat(q)`` and ``b`` separately is equal in exact arithmetic
        but differs by about eps * cond(M) (~1e-11 relative here).
        """
        return self._lu.solve(self.R @ np.asarray(q, dtype=float) + self.c)

    def step(self, s: np.ndarray) -> np.ndarray:
        """Time-stepper form: solve M s_{n+1} = R s_n + c."""
        out = self._lu.solve(self.R @ s + self.c)
        if not np.all(np.isfinite(out)):
            raise NumericalError("implicit solve produced non-finite values")
        return out

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.matmat, matmat=self.matmat, dtype=float)

    def dense(self) -> np.ndarray:
        """Dense A; only sensible for small grids."""
        return self.matmat(np.eye(self.shape[1]))


def _implicit_system(
    grid: GridSpec,
    diffusivity: float,
    velocity_x: float,
    dt: float,
    dirichlet: np.ndarray,
    dirichlet_values: np.ndarray,
) -> tuple[sp.csc_matrix, sp.csr_matrix, np.ndarray]:
    """Assemble M = I - dt L on free nodes and identity rows on Dirichlet nodes.

    Free nodes on the outer boundary get homogeneous Neumann conditions by
    mirroring the inner neighbour. Advection uses a backward (upwind)
    difference for ``velocity_x >= 0``.
    """
    nx, ny = grid.nx, grid.ny
    hx2, hy2 = grid.hx**2, grid.hy**2
    n = grid.size
    J, I = np.divmod(np.arange(n), nx)
    free = ~dirichlet.ravel()

    rows, cols, vals = [], [], []

    def add(mask, col_i, col_j, coef):
        rows.append(np.flatnonzero(mask))
        cols.append(col_j[mask] * nx + col_i[mask])
        vals.append(np.broadcast_to(coef, I.shape)[mask])

    im = np.where(I == 0, 1, I - 1)
    ip = np.where(I == nx - 1, nx - 2, I + 1)
    jm = np.where(J == 0, 1, J - 1)
    jp = np.where(J == ny - 1, ny - 2, J + 1)

    cx = -dt * diffusivity / hx2
    cy = -dt * diffusivity / hy2
    adv = -dt * velocity_x / grid.hx
    diag = 1.0 - 2.0 * cx - 2.0 * cy - adv
    add(free, I, J, diag)
    add(free, im, J, cx + adv)
    add(free, ip, J, cx)
    add(free, I, jm, cy)
    add(free, I, jp, cy)
    add(~free, I, J, 1.0)

    M = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    R = sp.diags(free.astype(float), format="csr")
    c = np.where(free, 0.0, dirichlet_values.ravel())
    return M, R, c


# -- advection-diffusion --------------------------------------------------------

ADV_DIFF_GRID = GridSpec(75, 75, 1.0, 1.0)
ADV_DIFF_DT = 0.01
ADV_DIFF_KAPPA = 250.0
ADV_DIFF_YBAR = 0.4


def adv_diff_inflow(y: np.ndarray) -> np.ndarray:
    """Dirichlet inflow profile on x = 0."""
    y = np.asarray(y, dtype=float)
    mid = 300.0 + 325.0 * (np.sin(3.0 * np.pi * np.abs(y - ADV_DIFF_YBAR)) + 1.0)
    return np.where((y >= 1.0 / 3.0) & (y <= 2.0 / 3.0), mid, 300.0)


def simulate_adv_diff(
    p: float,
    n_steps: int,
    export_operator: bool = False,
    boundary: Callable[[np.ndarray], np.ndarray] | None = None,
    initial: float = 300.0,
) -> tuple[SnapshotSet, LinearHFMOperator | None]:
    """Advection-diffusion with horizontal velocity ``p`` on a 75 x 75 grid.

    The state starts at ``initial`` everywhere except the Dirichlet column,
    which carries the inflow profile from t = 0.
    """
    if not 0.0 <= p <= 5000.0:
        raise ConfigError(f"velocity p={p} outside [0, 5000]")
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    grid = ADV_DIFF_GRID
    X, Y = grid.coords()
    dirichlet = X == 0.0
    profile = (boundary or adv_diff_inflow)(Y)
    values = np.where(dirichlet, profile, 0.0)
    M, R, c = _implicit_system(grid, ADV_DIFF_KAPPA, p, ADV_DIFF_DT, dirichlet, values)
    op = LinearHFMOperator(M, R, c)

    s0 = np.where(dirichlet, profile, initial).ravel()
    data = _march(op, s0, n_steps)
    snaps = SnapshotSet(data, 0.0, ADV_DIFF_DT, ParameterPoint(p), ("s",))
    return snaps, (op if export_operator else None)


def _march(op: LinearHFMOperator, s0: np.ndarray, n_steps: int) -> np.ndarray:
    data = np.empty((s0.size, n_steps + 1))
    data[:, 0] = s0
    for k in range(n_steps):
        data[:, k + 1] = op.step(data[:, k])
    return data


# -- masked diffusion -----------------------------------------------------------

MASKED_GRID = GridSpec(81, 81, 800.0, 800.0, mask=(280.0, 520.0, 280.0, 520.0))
MASKED_DT = 50.0


def simulate_masked_diffusion(
    p: float,
    n_steps: int = 100,
    export_operator: bool = False,
    grid: GridSpec = MASKED_GRID,
    values: tuple[float, float, float] = (2.0, 1.0, 3.0),
    initial: float = 0.0,
    check_range: bool = True,
) -> tuple[SnapshotSet, LinearHFMOperator | None]:
    """Transient diffusion rho c s_t = div(k grad s) with heat capacity c = p.

    Dirichlet values ``(left, right, cavity)``; top and bottom insulated.
    Snapshots hold the full nodal field, Dirichlet nodes included (cavity
    interior nodes are carried at the cavity value).
    """
    if check_range and not 1.0 <= p <= 2.0:
        raise ConfigError(f"heat capacity p={p} outside [1, 2]")
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    rho = k = 1.0
    left, right, cavity = values
    X, _ = grid.coords()
    cav = grid.cavity_nodes()
    dirichlet = (X == 0.0) | np.isclose(X, grid.lx) | cav
    dvals = np.where(cav, cavity, np.where(X == 0.0, left, right))
    M, R, c = _implicit_system(grid, k / (rho * p), 0.0, MASKED_DT, dirichlet, dvals)
    op = LinearHFMOperator(M, R, c)
    s0 = np.where(dirichlet, dvals, initial).ravel()
    data = _march(op, s0, n_steps)
    snaps = SnapshotSet(data, 0.0, MASKED_DT, ParameterPoint(p), ("s",))
    return snaps, (op if export_operator else None)


def _gradient(field: np.ndarray, valid: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Derivative along ``axis`` (0 = y, 1 = x) of a (ny, nx, T) field.

    Centered where both neighbours are valid nodes, one-sided where only one
    is, zero where neither is.
    """
    f = np.moveaxis(field, axis, 0)
    v = np.moveaxis(valid, axis, 0)[..., None]
    has_m = np.zeros_like(v)
    has_p = np.zeros_like(v)
    has_m[1:] = v[:-1] & v[1:]
    has_p[:-1] = v[1:] & v[:-1]
    fm = np.concatenate([f[:1], f[:-1]])
    fp = np.concatenate([f[1:], f[-1:]])
    out = np.where(has_m & has_p, (fp - fm) / (2 * h), 0.0)
    out = np.where(~has_m & has_p, (fp - f) / h, out)
    out = np.where(has_m & ~has_p, (f - fm) / h, out)
    return np.moveaxis(out, 0, axis)


def heat_rate(field: np.ndarray, grid: GridSpec = MASKED_GRID, k: float = 1.0) -> np.ndarray:
    """Heat rate through the left edge of the cavity, one value per column of ``field``.

    Q = sum over edge nodes of -k ds/dn * dl with the normal pointing out of
    the cavity (-x), ds/dx from a backward difference into the domain and
    trapezoidal edge weights.
    """
    if grid.mask is None:
        raise ConfigError("heat rate needs a cavity")
    i0, _, j0, j1 = grid.cavity_index_box()
    f = np.asarray(field).reshape(grid.ny, grid.nx, -1)
    dsdx = (f[j0 : j1 + 1, i0] - f[j0 : j1 + 1, i0 - 1]) / grid.hx
    w = np.full(j1 - j0 + 1, grid.hy)
    w[[0, -1]] *= 0.5
    return k * (w @ dsdx)


def derive_diffusion_qois(s: SnapshotSet, which: str, grid: GridSpec = MASKED_GRID, k: float = 1.0) -> SnapshotSet:
    """Flux (-k dS/dx and -k dS/dy stacked over domain nodes) or scalar heat rate."""
    if s.qoi_dim != grid.size:
        raise ConfigError(f"snapshot dimension {s.qoi_dim} does not match grid size {grid.size}")
    if which == "flux":
        valid = grid.domain_nodes()
        f = s.data.reshape(grid.ny, grid.nx, -1)
        qx = -k * _gradient(f, valid, grid.hx, axis=1)[valid]
        qy = -k * _gradient(f, valid, grid.hy, axis=0)[valid]
        return SnapshotSet(np.vstack([qx, qy]), s.t0, s.dt, s.parameter, ("qx", "qy"))
    if which == "heat_rate":
        if grid.mask is None:
            raise ConfigError("heat rate requested on a grid without a cavity")
        return SnapshotSet(heat_rate(s.data, grid, k)[None, :], s.t0, s.dt, s.parameter, ("heat_rate",))
    raise ConfigError(f"unknown QoI {which!r}")


# -- viscous Burgers ------------------------------------------------------------

BURGERS_CELLS = 256
BURGERS_RANGE = (1.0 / 800.0, 1.0 / 400.0)


def burgers_initial(x: np.ndarray) -> np.ndarray:
    return 0.5 + np.sin(2.0 * np.pi * x)


def _godunov_flux(ul: np.ndarray, ur: np.ndarray) -> np.ndarray:
    """Exact Riemann flux for f(u) = u^2 / 2."""
    fl, fr = 0.5 * ul * ul, 0.5 * ur * ur
    shock = np.maximum(fl, fr)
    rare = np.where((ul < 0.0) & (ur > 0.0), 0.0, np.minimum(fl, fr))
    return np.where(ul > ur, shock, rare)


def burgers_time_step(nu: float, umax: float, dx: float, cfl: float = 0.4) -> float:
    """Largest step with dt (umax/dx + 2 nu/dx^2) <= cfl."""
    return cfl / (umax / dx + 2.0 * nu / dx**2)


def simulate_burgers(
    p: float,
    n_steps: int = 250,
    dt_snap: float = 0.02,
    t_start: float = 0.0,
    cells: int = BURGERS_CELLS,
    cfl: float = 0.4,
    dt: float | None = None,
    check_range: bool = True,
) -> SnapshotSet:
    """Periodic viscous Burgers u_t + (u^2/2)_x = nu u_xx on [0, 1], nu = p.

    Cell averages are recorded every ``dt_snap`` starting at ``t_start``.
    The inner step is ``dt_snap / m`` with the smallest integer m meeting
    the CFL bound, so snapshot times coincide across viscosities.
    """
    if check_range and not BURGERS_RANGE[0] * (1 - 1e-12) <= p <= BURGERS_RANGE[1] * (1 + 1e-12):
        raise ConfigError(f"viscosity p={p} outside [1/800, 1/400]")
    if n_steps < 1 or dt_snap <= 0 or t_start < 0:
        raise ConfigError("need n_steps >= 1, dt_snap > 0, t_start >= 0")
    nu = float(p)
    dx = 1.0 / cells
    x = (np.arange(cells) + 0.5) * dx
    u = burgers_initial(x)
    umax = float(np.max(np.abs(u)))  # max |u| never grows for viscous Burgers
    dt_max = burgers_time_step(nu, umax, dx, cfl)
    if dt is None:
        dt = dt_max
    elif dt * (umax / dx + 2 * nu / dx**2) > cfl * (1 + 1e-12):
        raise ConfigError(f"time step {dt} violates CFL <= {cfl}")
    sub = max(1, math.ceil(dt_snap / dt - 1e-9))
    h = dt_snap / sub
    lead = t_start / h
    n_lead = int(round(lead))
    if abs(lead - n_lead) > 1e-6:
        n_lead = math.ceil(lead)

    a = h / dx
    d = nu * h / dx**2

    def advance(u, n):
        for _ in range(n):
            up = np.roll(u, -1)
            F = _godunov_flux(u, up)
            u = u - a * (F - np.roll(F, 1)) + d * (up - 2.0 * u + np.roll(u, 1))
        return u

    u = advance(u, n_lead)
    data = np.empty((cells, n_steps + 1))
    data[:, 0] = u
    for k in range(n_steps):
        u = advance(u, sub)
        data[:, k + 1] = u
    if not np.all(np.isfinite(data)):
        raise NumericalError("Burgers solution became non-finite")
    return SnapshotSet(data, n_lead * h, dt_snap, ParameterPoint(p), ("u",))
