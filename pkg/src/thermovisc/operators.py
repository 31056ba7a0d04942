r"""
Structured-grid operators with exact summation by parts.

Fields live on the nodes of a tensor-product grid over a rectangle. Gradients
live on the edges joining neighbouring nodes (one edge family per axis), so
for a node field :math:`\phi`

.. math::

    (G\phi)_e = \frac{\phi_j - \phi_i}{h_k}, \qquad e = (i, j) \text{ along axis } k.

Node quadrature :math:`M` is the tensor trapezoid rule; edge quadrature
:math:`W` weights an axis-:math:`k` edge by :math:`h_k` times the trapezoid
weights of the remaining axes. With these two diagonal inner products every
second-order operator is the negative adjoint of the gradient,

.. math::

    \Delta = -M^{-1} G^T W G,

restricted to interior rows and columns for Dirichlet fields and used in full
for Neumann fields. The full form coincides with ghost-node reflection at the
boundary and annihilates constants, so ``<lap_neumann phi, 1> = 0`` and
``<lap_dirichlet phi, psi> = -<grad phi, grad psi>`` hold up to rounding.
The Navier bilaplacian is ``lap_dirichlet @ lap_dirichlet``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import trapezoid

from .errors import EmptyTrajectory, GridTooCoarse, LambdaTooSmall, SolveFailure

MIN_NODES = 5


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid on ``[0, L_1] x ... x [0, L_N]``."""

    extents: tuple
    nodes: tuple

    def __post_init__(self):
        extents = tuple(float(e) for e in np.atleast_1d(self.extents))
        nodes = tuple(int(n) for n in np.atleast_1d(self.nodes))
        if len(extents) != len(nodes):
            raise ValueError("extents and nodes must have one entry per axis")
        if len(nodes) not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {len(nodes)}")
        if any(e <= 0 for e in extents):
            raise ValueError("extents must be positive")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dim(self) -> int:
        return len(self.nodes)

    @property
    def spacing(self) -> tuple:
        return tuple(e / (n - 1) for e, n in zip(self.extents, self.nodes))

    @property
    def h(self) -> float:
        return max(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def axes(self) -> list:
        return [np.linspace(0.0, e, n) for e, n in zip(self.extents, self.nodes)]

    def coordinates(self) -> list:
        """Flattened node coordinates, one array per axis."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return [m.ravel() for m in mesh]

    def boundary_mask(self) -> np.ndarray:
        masks = []
        for n in self.nodes:
            m = np.zeros(n, dtype=bool)
            m[[0, -1]] = True
            masks.append(m)
        if self.dim == 1:
            return masks[0]
        return np.logical_or.outer(masks[0], masks[1]).ravel()

    def refine(self) -> "Grid":
        return Grid(self.extents, tuple(2 * (n - 1) + 1 for n in self.nodes))


def _trapezoid_weights(n, h):
    w = np.full(n, h)
    w[[0, -1]] = 0.5 * h
    return w


def _difference(n, h):
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr") / h


def _incidence(n):
    return sp.diags([np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


class OperatorSet:
    """Discrete operators for one grid; built by :func:`build_operators`.

    Node-level maps act on flat arrays of length ``grid.size``; the ``*_int``
    matrices act on interior degrees of freedom only.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        h = grid.spacing
        n = grid.nodes
        if grid.dim == 1:
            G = _difference(n[0], h[0])
            E = _incidence(n[0])
            W = np.full(n[0] - 1, h[0])
            M = _trapezoid_weights(n[0], h[0])
            axis = np.zeros(n[0] - 1, dtype=int)
        else:
            Ix, Iy = sp.identity(n[0], format="csr"), sp.identity(n[1], format="csr")
            wx, wy = _trapezoid_weights(n[0], h[0]), _trapezoid_weights(n[1], h[1])
            G = sp.vstack([sp.kron(_difference(n[0], h[0]), Iy), sp.kron(Ix, _difference(n[1], h[1]))])
            E = sp.vstack([sp.kron(_incidence(n[0]), Iy), sp.kron(Ix, _incidence(n[1]))])
            W = np.concatenate([np.kron(np.full(n[0] - 1, h[0]), wy), np.kron(wx, np.full(n[1] - 1, h[1]))])
            M = np.kron(wx, wy)
            axis = np.concatenate([np.zeros((n[0] - 1) * n[1], dtype=int), np.ones(n[0] * (n[1] - 1), dtype=int)])

        self.G = G.tocsr()
        self.E = E.tocsr()
        self.edge_weights = W
        self.quad_weights = M
        self.edge_axis = axis

        self.boundary = grid.boundary_mask()
        self.interior = np.flatnonzero(~self.boundary)
        P = sp.identity(grid.size, format="csr")[self.interior]
        self.P = P

        stiffness = (self.G.T @ sp.diags(W) @ self.G).tocsr()
        self.stiffness = stiffness
        Minv = sp.diags(1.0 / M)
        self.lap_neumann = (-(Minv @ stiffness)).tocsr()

        self.G_int = (self.G @ P.T).tocsr()
        self.M_int = M[self.interior]
        self.stiffness_int = (P @ stiffness @ P.T).tocsr()
        self.L_int = (-(sp.diags(1.0 / self.M_int) @ self.stiffness_int)).tocsr()
        self.lap_dirichlet = (P.T @ self.L_int @ P).tocsr()
        self.bilap_navier = (self.lap_dirichlet @ self.lap_dirichlet).tocsr()

    # node / edge algebra

    def grad(self, phi):
        return self.G @ phi

    def div(self, flux):
        """Negative adjoint of :meth:`grad`: ``<div F, phi> = -<F, grad phi>_W``."""
        return -(self.G.T @ (self.edge_weights * flux)) / self.quad_weights

    def lap_d(self, phi):
        return self.lap_dirichlet @ phi

    def lap_n(self, phi):
        return self.lap_neumann @ phi

    def bilap(self, phi):
        return self.bilap_navier @ phi

    def edge_average(self, phi):
        return 0.5 * (self.E @ phi)

    def distribute(self, edge_q):
        """Node field with ``<distribute(q), 1>_M == <q, 1>_W``, half of each edge per endpoint."""
        return 0.5 * (self.E.T @ (self.edge_weights * edge_q)) / self.quad_weights

    def inner(self, a, b):
        return float(np.dot(self.quad_weights * a, b))

    def edge_inner(self, p, q):
        return float(np.dot(self.edge_weights * p, q))

    def integral(self, a):
        return float(np.dot(self.quad_weights, a))

    def norm(self, a):
        return float(np.sqrt(self.inner(a, a)))

    def axis_edges(self, k):
        return self.edge_axis == k

    @cached_property
    def _w22_factor(self):
        H = (sp.diags(self.M_int) + self.stiffness_int
             + self.L_int.T @ sp.diags(self.M_int) @ self.L_int).tocsc()
        return H, spla.splu(H), matrix_inf_norm(H)


def build_operators(grid: Grid) -> OperatorSet:
    """Assemble the operator set for ``grid``; raises GridTooCoarse below 5 nodes per axis."""
    if any(n < MIN_NODES for n in grid.nodes):
        raise GridTooCoarse(f"every axis needs at least {MIN_NODES} nodes, got {grid.nodes}")
    if any(s <= 0 for s in grid.spacing):
        raise GridTooCoarse("spacing must be positive on every axis")
    return OperatorSet(grid)


def lp_spacetime_norm(traj, field: str, p: float, shift: str = "none") -> float:
    r"""Space-time :math:`L^p` norm of a trajectory quantity.

    ``field`` is one of ``theta``, ``grad_theta``, ``grad_v``. Gradients are
    taken componentwise on edges, i.e. :math:`\sum_k \int |\partial_k q|^p`.
    ``shift="one_plus"`` replaces :math:`\Theta` by :math:`1 + \Theta`. Time
    integration is the trapezoid rule over the stored snapshots.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    times = np.asarray(traj.times)
    if len(times) == 0:
        raise EmptyTrajectory("trajectory has no snapshots")
    ops = traj.ops
    if field == "theta":
        q = np.asarray(traj.theta) + (1.0 if shift == "one_plus" else 0.0)
        w = ops.quad_weights
    elif field in ("grad_theta", "grad_v"):
        if shift != "none":
            raise ValueError("shift applies to theta only")
        src = traj.theta if field == "grad_theta" else traj.v
        q = (ops.G @ np.asarray(src).T).T
        w = ops.edge_weights
    else:
        raise ValueError(f"unknown field {field!r}")
    per_time = (np.abs(q) ** p) @ w
    if len(times) == 1:
        return 0.0
    return float(trapezoid(per_time, times) ** (1.0 / p))


def backward_error(A_norm, x, b, r) -> float:
    """Normwise relative residual ``|r| / (|A| |x| + |b|)`` in the infinity norm."""
    denom = A_norm * np.max(np.abs(x)) + np.max(np.abs(b))
    return float(np.max(np.abs(r)) / denom) if denom > 0 else 0.0


def matrix_inf_norm(A) -> float:
    return float(abs(A).sum(axis=1).max())


def dual_norm_w22(g, ops: OperatorSet, tol: float = 1e-12) -> float:
    r"""Dual norm of ``g`` against the Hilbertian norm
    :math:`\|\psi\|^2 + \|\nabla\psi\|^2 + \|\Delta\psi\|^2` on Dirichlet fields.

    Solves ``(M + G^T W G + L^T M L) r = M g`` on interior nodes and returns
    ``sqrt(g . M r)``. This norm is equivalent to the sum norm
    ``||psi|| + ||grad psi|| + ||lap psi||`` with constants in ``[1, sqrt(3)]``.
    The solve is refined until its backward error is below ``tol``.
    """
    g_int = np.asarray(g, dtype=float)[ops.interior]
    b = ops.M_int * g_int
    if not np.any(b):
        return 0.0
    H, lu, H_norm = ops._w22_factor
    r = lu.solve(b)
    for _ in range(3):
        res = b - H @ r
        if backward_error(H_norm, r, b, res) <= tol:
            break
        r = r + lu.solve(res)
    else:
        res = b - H @ r
        err = backward_error(H_norm, r, b, res)
        if err > tol:
            raise SolveFailure(f"W22 Riesz solve backward error {err:.3e} exceeds {tol:.1e}")
    return float(np.sqrt(max(np.dot(b, r), 0.0)))


class SpatialDictionary:
    """Fixed family of node fields used as a sampled test class."""

    def __init__(self, ops: OperatorSet, fields: Sequence, names: Sequence[str] | None = None):
        if len(fields) == 0:
            raise ValueError("dictionary must be nonempty")
        self.ops = ops
        self.fields = [np.asarray(f, dtype=float) for f in fields]
        self.names = list(names) if names is not None else [f"psi{j}" for j in range(len(fields))]
        self._norms = {}

    def __len__(self):
        return len(self.fields)

    def w1_norms(self, lam: float) -> np.ndarray:
        """``(||psi||_lam^lam + sum_k ||d_k psi||_lam^lam)^(1/lam)`` per entry."""
        if lam not in self._norms:
            ops = self.ops
            out = []
            for psi in self.fields:
                s = np.dot(ops.quad_weights, np.abs(psi) ** lam)
                s += np.dot(ops.edge_weights, np.abs(ops.G @ psi) ** lam)
                out.append(s ** (1.0 / lam))
            self._norms[lam] = np.array(out)
        return self._norms[lam]


def default_neumann_dictionary(ops: OperatorSet, size: int = 8) -> SpatialDictionary:
    """Products of low-order polynomials and cosine modes on the grid."""
    coords = ops.grid.coordinates()
    ext = ops.grid.extents
    s = [c / L for c, L in zip(coords, ext)]
    one = np.ones(ops.grid.size)
    if ops.grid.dim == 1:
        x = s[0]
        cands = [
            ("1", one), ("cos1", np.cos(np.pi * x)), ("cos2", np.cos(2 * np.pi * x)),
            ("x", x), ("x2", x ** 2), ("x_cos1", x * np.cos(np.pi * x)),
            ("cos3", np.cos(3 * np.pi * x)), ("x2_cos2", x ** 2 * np.cos(2 * np.pi * x)),
        ]
    else:
        x, y = s
        cands = [
            ("1", one), ("cosx", np.cos(np.pi * x)), ("cosy", np.cos(np.pi * y)),
            ("cosx_cosy", np.cos(np.pi * x) * np.cos(np.pi * y)), ("x", x), ("y", y),
            ("xy", x * y), ("x2_cosy", x ** 2 * np.cos(np.pi * y)),
        ]
    cands = cands[:size]
    return SpatialDictionary(ops, [c[1] for c in cands], [c[0] for c in cands])


def dual_pairing_w1lambda(g, dictionary: SpatialDictionary, lam: float) -> float:
    r"""Sampled lower bound for :math:`\|g\|_{(W^{1,\lambda})^*}`.

    Returns :math:`\max_j |\langle g, \psi_j\rangle| / \|\psi_j\|_{W^{1,\lambda}}`
    over the dictionary entries.
    """
    ops = dictionary.ops
    N = ops.grid.dim
    if lam <= N + 2:
        raise LambdaTooSmall(f"lambda must exceed N + 2 = {N + 2}, got {lam}")
    g = np.asarray(g, dtype=float)
    norms = dictionary.w1_norms(lam)
    pair = np.array([abs(ops.inner(g, psi)) for psi in dictionary.fields])
    return float(np.max(pair / norms))
