"""Staggered-grid discretization of 1-D radial Dirac systems.

Both local models reduce, mode by mode, to a first-order system

    d_a(x) alpha + (-d/dx + c(x)) beta = lambda alpha
    (d/dx + c(x)) alpha + d_b(x) beta  = lambda beta

on an interval [a, b] with measure dx.  We place N alpha unknowns at the cell
centres a + (i + 1/2) h and N - 1 beta unknowns at the interior cell faces
a + (j + 1) h, with beta = 0 at both ends.  The derivative is a one-cell
difference and c is averaged onto the face, so the interleaved unknown vector
(alpha_0, beta_0, alpha_1, ..., alpha_{N-1}) sees a symmetric tridiagonal
matrix of size 2N - 1.  The staggering removes the spurious
high-wavenumber partner modes that a collocated centred stencil produces,
and the lower operator (d/dx + c), being an (N-1) x N matrix, has a discrete
kernel that is the exact null vector of the discretized Cauchy-Riemann
operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.linalg.lapack import dstebz
from scipy.sparse.linalg import eigsh

from .errors import MultipleEigenvalues, SingularCoefficient

Coefficient = Callable[[np.ndarray], np.ndarray]

SOLVERS = ("banded", "shift_invert", "dense")


@dataclass(frozen=True)
class StaggeredGrid:
    a: float
    b: float
    N: int

    def __post_init__(self):
        if self.N < 2 or not self.b > self.a:
            raise ValueError("grid needs N >= 2 and b > a")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.N

    @property
    def alpha_nodes(self) -> np.ndarray:
        return self.a + (np.arange(self.N) + 0.5) * self.h

    @property
    def beta_nodes(self) -> np.ndarray:
        return self.a + (np.arange(self.N - 1) + 1.0) * self.h

    @property
    def size(self) -> int:
        return 2 * self.N - 1

    @classmethod
    def full(cls, N: int) -> "StaggeredGrid":
        """Grid over [eps, 2 - eps] with eps equal to one grid spacing."""
        h = 2.0 / (N + 2)
        return cls(h, 2.0 - h, N)


@dataclass
class DiscreteRadialOperator:
    """Symmetric tridiagonal matrix of a radial system on a staggered grid.

    ``diag`` and ``offdiag`` are in interleaved order.  The ``r``-dependence
    of both models enters only through +r/2 on alpha rows and -r/2 on beta
    rows, which :meth:`shifted` exploits.
    """

    grid: StaggeredGrid
    diag: np.ndarray
    offdiag: np.ndarray
    window: tuple[float, float] = (-np.inf, np.inf)
    label: str = ""
    parity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        par = np.ones(self.grid.size)
        par[1::2] = -1.0
        self.parity = par

    @property
    def size(self) -> int:
        return self.grid.size

    def shifted(self, dr: float) -> "DiscreteRadialOperator":
        """Operator at r + dr."""
        return DiscreteRadialOperator(self.grid, self.diag + 0.5 * dr * self.parity,
                                      self.offdiag, self.window, self.label)

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.diags([self.offdiag, self.diag, self.offdiag], [-1, 0, 1], format="csr")

    def to_dense(self) -> np.ndarray:
        n = self.size
        M = np.zeros((n, n))
        idx = np.arange(n)
        M[idx, idx] = self.diag
        M[idx[:-1], idx[1:]] = self.offdiag
        M[idx[1:], idx[:-1]] = self.offdiag
        return M

    def split(self, vec: np.ndarray):
        """Return (alpha, beta) samples of an interleaved vector."""
        return vec[0::2], vec[1::2]

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = self.diag * vec
        out[:-1] += self.offdiag * vec[1:]
        out[1:] += self.offdiag * vec[:-1]
        return out

    # ------------------------------------------------------------------
    def eigenpairs(self, window: Optional[tuple[float, float]] = None, solver: str = "banded",
                   max_count: int = 64):
        """All eigenpairs with eigenvalue in the open window.

        Vectors are returned as columns normalized so that sum(v**2) * h = 1.
        """
        lo, hi = self.window if window is None else window
        if solver == "banded":
            w, v = eigh_tridiagonal(self.diag, self.offdiag, select="v", select_range=(lo, hi),
                                    lapack_driver="stebz")
        elif solver == "dense":
            w, v = np.linalg.eigh(self.to_dense())
        elif solver == "shift_invert":
            w, v = self._shift_invert(lo, hi, max_count)
        else:
            raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
        keep = (w > lo) & (w < hi)
        w, v = w[keep], v[:, keep]
        order = np.argsort(w, kind="stable")
        w, v = w[order], v[:, order]
        v = v / np.sqrt(self.grid.h)
        # fix the sign so that the largest alpha entry is positive
        for j in range(v.shape[1]):
            a = v[0::2, j]
            if a[np.argmax(np.abs(a))] < 0:
                v[:, j] = -v[:, j]
        return w, v

    def _shift_invert(self, lo, hi, max_count):
        center = 0.5 * (lo + hi) if np.isfinite(lo + hi) else 0.0
        M = self.to_sparse().tocsc()
        k = min(4, self.size - 2)
        while True:
            w, v = eigsh(M, k=k, sigma=center, which="LM", tol=1e-14)
            inside = (w > lo) & (w < hi)
            if inside.sum() < k or k >= min(max_count, self.size - 2):
                return w, v
            k = min(2 * k, self.size - 2)

    def eigenvalues_in(self, lo: float, hi: float, dr: float = 0.0, tol: float = 1e-12) -> np.ndarray:
        """Eigenvalues in [lo, hi) of the operator at r + dr, by Sturm bisection.

        Much cheaper than :meth:`eigenpairs` when vectors are not needed; a
        large ``tol`` is fine when only the count or the sign matters.
        """
        diag = self.diag + 0.5 * dr * self.parity if dr else self.diag
        m, w, _, _, info = dstebz(diag, self.offdiag, 1, lo, hi, 0, 0, tol, "E")
        if info != 0:
            raise RuntimeError(f"dstebz failed with info={info}")
        return np.sort(w[:m])

    def residual_norm(self, lam: float, vec: np.ndarray) -> float:
        """Grid L2 norm of (H - lam) psi for a vector normalized with weight h."""
        res = self.apply(vec) - lam * vec
        return float(np.sqrt(np.sum(res**2) * self.grid.h))

    def unique_eigenpair(self, window, solver: str = "banded"):
        w, v = self.eigenpairs(window, solver)
        if w.size > 1:
            raise MultipleEigenvalues(f"{w.size} eigenvalues in window {window}: {w}")
        if w.size == 0:
            return None
        return float(w[0]), v[:, 0]


def assemble(grid: StaggeredGrid, d_alpha: Coefficient, d_beta: Coefficient, c: Coefficient,
             label: str = "") -> DiscreteRadialOperator:
    """Assemble the staggered operator for given coefficient functions."""
    xa, xb = grid.alpha_nodes, grid.beta_nodes
    h = grid.h
    da, db, cb = d_alpha(xa), d_beta(xb), c(xb)
    if not (np.all(np.isfinite(da)) and np.all(np.isfinite(db)) and np.all(np.isfinite(cb))):
        raise SingularCoefficient(f"non-finite coefficient on grid for {label}")
    diag = np.empty(grid.size)
    diag[0::2] = da
    diag[1::2] = db
    off = np.empty(grid.size - 1)
    off[0::2] = -1.0 / h + 0.5 * cb
    off[1::2] = 1.0 / h + 0.5 * cb
    return DiscreteRadialOperator(grid, diag, off, label=label)
