"""Finite Integration Technique model of a PEC cavity driven by a line current.

Unknowns are the electric edge voltages ``e`` on the primal edges and the
magnetic voltages ``h`` on the dual edges (one per primal facet). Within each
block the degrees of freedom are ordered axis-major (x, then y, then z
oriented) and lexicographically inside an axis with the x index running
fastest.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.constants import epsilon_0, mu_0

from .linode import LinearOdeSystem, SparseMatrix

__all__ = [
    "EPS0",
    "MU0",
    "FitGrid",
    "FitOperators",
    "WaveSourceConfig",
    "build_curl",
    "build_gradient",
    "build_materials",
    "build_operators",
    "apply_pec",
    "line_current",
    "build_wave_system",
    "energy",
    "state_energy",
    "ez_snapshot",
]

EPS0 = epsilon_0
MU0 = mu_0


@dataclass(frozen=True)
class FitGrid:
    """Tensor grid with ``nx * ny * nz`` nodes and uniform spacings (m)."""

    nx: int = 21
    ny: int = 21
    nz: int = 2
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 2:
            raise ValueError("every axis needs at least two nodes")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError("grid spacings must be positive")

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny * self.nz

    def edge_shapes(self):
        """(nx, ny, nz) index ranges of the x-, y- and z-directed edges."""
        nx, ny, nz = self.nx, self.ny, self.nz
        return [(nx - 1, ny, nz), (nx, ny - 1, nz), (nx, ny, nz - 1)]

    def facet_shapes(self):
        """Index ranges of facets normal to x, y and z."""
        nx, ny, nz = self.nx, self.ny, self.nz
        return [(nx, ny - 1, nz - 1), (nx - 1, ny, nz - 1), (nx - 1, ny - 1, nz)]

    @property
    def n_edges(self) -> int:
        return sum(int(np.prod(s)) for s in self.edge_shapes())

    @property
    def n_facets(self) -> int:
        return sum(int(np.prod(s)) for s in self.facet_shapes())

    def edge_index(self, axis: int, ix: int, iy: int, iz: int) -> int:
        shapes = self.edge_shapes()
        off = sum(int(np.prod(s)) for s in shapes[:axis])
        sx, sy, sz = shapes[axis]
        if not (0 <= ix < sx and 0 <= iy < sy and 0 <= iz < sz):
            raise IndexError(f"edge ({axis}, {ix}, {iy}, {iz}) out of range")
        return off + ix + sx * (iy + sy * iz)

    def edge_positions(self, axis: int) -> np.ndarray:
        """Integer (ix, iy, iz) of every edge along ``axis``, in index order."""
        sx, sy, sz = self.edge_shapes()[axis]
        iz, iy, ix = np.meshgrid(np.arange(sz), np.arange(sy), np.arange(sx), indexing="ij")
        return np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)

    def edge_slice(self, axis: int) -> slice:
        sizes = [int(np.prod(s)) for s in self.edge_shapes()]
        off = sum(sizes[:axis])
        return slice(off, off + sizes[axis])


@dataclass(frozen=True)
class FitOperators:
    """Curl incidence, diagonal material matrices and the PEC mask.

    ``c`` maps primal edge voltages to facet circulations; ``c_dual`` is its
    transpose. ``m_eps`` and ``m_mu`` hold the material diagonals.
    """

    grid: FitGrid
    c: SparseMatrix
    c_dual: SparseMatrix
    m_eps: np.ndarray
    m_mu: np.ndarray
    pec_mask: np.ndarray

    @property
    def n_e(self) -> int:
        return self.c.ncols

    @property
    def n_h(self) -> int:
        return self.c.nrows

    @property
    def n(self) -> int:
        return self.n_e + self.n_h

    def split(self, u):
        """Split a state ``[h; e]`` into ``(h, e)``."""
        u = np.asarray(u)
        return u[..., :self.n_h], u[..., self.n_h:]

    def mass(self) -> np.ndarray:
        """Diagonal of the block mass matrix ``diag(M_mu, M_eps)``."""
        return np.concatenate([self.m_mu, self.m_eps])

    def stiffness(self) -> SparseMatrix:
        """``K = [[0, C], [-C~, 0]]``."""
        c = self.c.to_scipy()
        ct = self.c_dual.to_scipy()
        k = sp.bmat([[None, c], [-ct, None]], format="csr")
        return SparseMatrix.from_scipy(k)


@dataclass(frozen=True)
class WaveSourceConfig:
    """Gaussian line current ``i_max * exp(-4 ((t - sigma_t) / sigma_t)^2)``.

    ``location`` lists the z-edge indices carrying the current; ``None``
    selects the z-edge column through the grid centre.
    """

    i_max: float = 1.0
    sigma_t: float = 2e-8
    location: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError("sigma_t must be positive")


def _diff(n: int) -> sp.csr_matrix:
    """(n-1) x n forward difference on n nodes."""
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def _eye(n: int) -> sp.csr_matrix:
    return sp.identity(n, format="csr")


def _kron3(az, ay, ax):
    # x index runs fastest
    return sp.kron(az, sp.kron(ay, ax, format="csr"), format="csr")


def build_curl(grid: FitGrid) -> SparseMatrix:
    """Primal curl incidence (facets x edges), entries in {-1, 0, +1}."""
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    dx_, dy_, dz_ = _diff(nx), _diff(ny), _diff(nz)
    ix, iy, iz = _eye(nx), _eye(ny), _eye(nz)
    cx, cy, cz = _eye(nx - 1), _eye(ny - 1), _eye(nz - 1)
    # facets normal to x: (node x, cell y, cell z)
    fx_ey = -_kron3(dz_, cy, ix)
    fx_ez = _kron3(cz, dy_, ix)
    # facets normal to y: (cell x, node y, cell z)
    fy_ex = _kron3(dz_, iy, cx)
    fy_ez = -_kron3(cz, iy, dx_)
    # facets normal to z: (cell x, cell y, node z)
    fz_ex = -_kron3(iz, dy_, cx)
    fz_ey = _kron3(iz, cy, dx_)
    curl = sp.bmat([[None, fx_ey, fx_ez],
                    [fy_ex, None, fy_ez],
                    [fz_ex, fz_ey, None]], format="csr")
    return SparseMatrix.from_scipy(curl)


def build_gradient(grid: FitGrid) -> SparseMatrix:
    """Nodal gradient incidence (edges x nodes)."""
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    grad = sp.vstack([
        _kron3(_eye(nz), _eye(ny), _diff(nx)),
        _kron3(_eye(nz), _diff(ny), _eye(nx)),
        _kron3(_diff(nz), _eye(ny), _eye(nx)),
    ], format="csr")
    return SparseMatrix.from_scipy(grad)


def _dual_widths(n: int, h: float) -> np.ndarray:
    """Length of the dual cell around each of ``n`` nodes (half at the ends)."""
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _outer3(wz, wy, wx) -> np.ndarray:
    return np.multiply.outer(wz, np.multiply.outer(wy, wx)).ravel()


def build_materials(grid: FitGrid, eps: float = EPS0, mu: float = MU0):
    """Return the diagonals ``(m_eps, m_mu)`` of a homogeneous medium.

    ``m_eps = eps * (dual facet area) / (edge length)`` and
    ``m_mu = mu * (facet area) / (dual edge length)``; dual cells are cut at
    the domain boundary.
    """
    if not (eps > 0 and mu > 0):
        raise ValueError("eps and mu must be positive")
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    dx, dy, dz = grid.dx, grid.dy, grid.dz
    px, py, pz = np.full(nx - 1, dx), np.full(ny - 1, dy), np.full(nz - 1, dz)
    qx, qy, qz = _dual_widths(nx, dx), _dual_widths(ny, dy), _dual_widths(nz, dz)
    # dual facet area over edge length
    m_eps = eps * np.concatenate([
        _outer3(qz, qy, 1.0 / px),
        _outer3(qz, 1.0 / py, qx),
        _outer3(1.0 / pz, qy, qx),
    ])
    # primal facet area over dual edge length
    m_mu = mu * np.concatenate([
        _outer3(pz, py, 1.0 / qx),
        _outer3(pz, 1.0 / qy, px),
        _outer3(1.0 / qz, py, px),
    ])
    return m_eps, m_mu


def boundary_edge_mask(grid: FitGrid) -> np.ndarray:
    """True for edges lying in the boundary surface (tangential to it)."""
    masks = []
    lim = (grid.nx - 1, grid.ny - 1, grid.nz - 1)
    for axis in range(3):
        pos = grid.edge_positions(axis)
        on = np.zeros(len(pos), dtype=bool)
        for other in range(3):
            if other == axis:
                continue
            on |= (pos[:, other] == 0) | (pos[:, other] == lim[other])
        masks.append(on)
    return np.concatenate(masks)


def build_operators(grid: FitGrid, eps: float = EPS0, mu: float = MU0) -> FitOperators:
    """Curl and material operators without any boundary condition."""
    c = build_curl(grid)
    m_eps, m_mu = build_materials(grid, eps, mu)
    return FitOperators(grid, c, c.transpose(), m_eps, m_mu,
                        np.zeros(c.ncols, dtype=bool))


def apply_pec(ops: FitOperators, grid: FitGrid | None = None) -> FitOperators:
    """Flag boundary-tangential edges and decouple them from the curl.

    The masked columns of ``c`` (rows of ``c_dual``) are removed, so the
    corresponding ``e`` entries never change and stay zero from a zero start.
    """
    grid = grid or ops.grid
    mask = ops.pec_mask | boundary_edge_mask(grid)
    keep = sp.diags((~mask).astype(np.float64))
    c = ops.c.to_scipy() @ keep
    c.eliminate_zeros()
    c = SparseMatrix.from_scipy(c)
    return replace(ops, c=c, c_dual=c.transpose(), pec_mask=mask)


def line_current(t, cfg: WaveSourceConfig = WaveSourceConfig()):
    """Gaussian line current in A; accepts scalars or arrays."""
    x = (np.asarray(t, dtype=np.float64) - cfg.sigma_t) / cfg.sigma_t
    val = cfg.i_max * np.exp(-4.0 * x * x)
    return float(val) if np.ndim(val) == 0 else val


def center_z_edges(grid: FitGrid) -> tuple[int, ...]:
    """The column of z-edges through the centre node ``(nx//2, ny//2)``."""
    ix, iy = grid.nx // 2, grid.ny // 2
    return tuple(grid.edge_index(2, ix, iy, iz) for iz in range(grid.nz - 1))


def build_wave_system(grid: FitGrid = FitGrid(), cfg: WaveSourceConfig = WaveSourceConfig(),
                      eps: float = EPS0, mu: float = MU0, pec: bool = True) -> LinearOdeSystem:
    """State ``u = [h; e]``, ``A = -M^-1 K`` and ``g(t) = [0; -M_eps^-1 j(t)]``.

    Every edge of the source column carries the full line current. The
    returned system keeps its :class:`FitOperators` in ``structure``.
    """
    ops = build_operators(grid, eps, mu)
    if pec:
        ops = apply_pec(ops, grid)
    location = center_z_edges(grid) if cfg.location is None else tuple(cfg.location)
    if ops.pec_mask[list(location)].any():
        raise ValueError("source edges lie on the PEC boundary")
    c = ops.c.to_scipy()
    a = sp.bmat([[None, -sp.diags(1.0 / ops.m_mu) @ c],
                 [sp.diags(1.0 / ops.m_eps) @ c.T, None]], format="csr")
    a.eliminate_zeros()
    n_h = ops.n_h
    rows = n_h + np.array(location, dtype=np.int64)
    profile = np.zeros(ops.n)
    profile[rows] = -1.0 / ops.m_eps[list(location)]
    profile.flags.writeable = False

    def source(t, _profile=profile, _cfg=cfg):
        return line_current(t, _cfg) * _profile

    return LinearOdeSystem(SparseMatrix.from_scipy(a), source, np.zeros(ops.n), 0.0,
                           structure=ops)


def energy(e, h, ops: FitOperators) -> float:
    """Stored energy ``(e^T M_eps e + h^T M_mu h) / 2`` in J."""
    e = np.asarray(e, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if e.shape != (ops.n_e,) or h.shape != (ops.n_h,):
        raise ValueError("field vectors do not match the operators")
    return 0.5 * (float(np.dot(ops.m_eps * e, e)) + float(np.dot(ops.m_mu * h, h)))


def state_energy(states, ops: FitOperators) -> np.ndarray:
    """Energy of each row of ``states`` (layout ``[h; e]``)."""
    states = np.atleast_2d(states)
    h, e = ops.split(states)
    return 0.5 * ((e * e) @ ops.m_eps + (h * h) @ ops.m_mu)


def ez_snapshot(e, ops: FitOperators) -> np.ndarray:
    """Rows ``(ix, iy, iz, e_z)`` with ``e_z`` in V/m for every z-edge."""
    grid = ops.grid
    e = np.asarray(e, dtype=np.float64)
    pos = grid.edge_positions(2)
    ez = e[grid.edge_slice(2)] / grid.dz
    return np.column_stack([pos.astype(np.float64), ez])
