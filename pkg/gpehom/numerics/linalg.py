"""
Symmetric banded / bordered linear algebra (numerics/linalg.py)

- banded matvec and Gershgorin bounds on SymBandMatrix
- symmetric eigendecomposition (tridiagonal or banded LAPACK drivers)
- bordered systems [[M, B], [C, E]] with a banded symmetric core, factorized with
  SuperLU; solves, determinant sign and smallest-singular-value estimates all
  reuse one factorization
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from gpehom.numerics.discretize import SymBandMatrix

DEFAULT_DENSE_CAP = 4096
PIVOT_RTOL = 1e-14


class RankDeficiencyError(ValueError):
    """Raised when a factorization meets a (near) zero pivot."""

    def __init__(self, message: str, pivot_index: int = -1, pivot: float = 0.0, scale: float = 0.0):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.pivot = pivot
        self.scale = scale


class EigenSolverError(RuntimeError):
    """Raised when the symmetric eigensolver does not converge."""


# ---------------------------------------------------------------------------
# banded helpers
# ---------------------------------------------------------------------------

def matvec(M: SymBandMatrix, v: np.ndarray) -> np.ndarray:
    """y = M v using only the stored upper bands."""
    v = np.asarray(v, dtype=float)
    if v.shape != (M.size,):
        raise ValueError(f"dimension mismatch: matrix is {M.size}x{M.size}, vector has shape {v.shape}")
    y = M.bands[0] * v
    for k, values in M.bands.items():
        if k == 0:
            continue
        y[:-k] += values * v[k:]
        y[k:] += values * v[:-k]
    return y


def gershgorin_radius(M: SymBandMatrix) -> float:
    """max_i |m_ii| + sum_j!=i |m_ij|, an upper bound on the spectral radius."""
    if M.size == 0:
        return 0.0
    rows = np.abs(M.bands[0]).copy()
    for k, values in M.bands.items():
        if k == 0:
            continue
        rows[:-k] += np.abs(values)
        rows[k:] += np.abs(values)
    return float(rows.max())


@dataclass(frozen=True, eq=False)
class DenseSymEig:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)


def sym_eigen_full(
    M: SymBandMatrix,
    select: Optional[Tuple[int, int]] = None,
    eigvals_only: bool = False,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> DenseSymEig:
    """Eigendecomposition of a symmetric banded matrix.

    Tridiagonal (and diagonal) inputs go straight to the tridiagonal QL/QR
    driver; wider bands are reduced to tridiagonal form first. ``select`` is an
    inclusive 0-based index range into the ascending spectrum.
    """
    if M.size > dense_cap:
        raise ValueError(f"matrix of size {M.size} exceeds the dense eigensolver cap {dense_cap}")
    if M.size == 0:
        return DenseSymEig(np.zeros(0), None if eigvals_only else np.zeros((0, 0)))
    kwargs = {}
    if select is not None:
        lo, hi = int(select[0]), int(select[1])
        if not (0 <= lo <= hi < M.size):
            raise ValueError(f"select range {select} outside 0..{M.size - 1}")
        kwargs = {"select": "i", "select_range": (lo, hi)}
    try:
        if M.bandwidth <= 1:
            result = sla.eigh_tridiagonal(M.bands[0], M.band(1), eigvals_only=eigvals_only, **kwargs)
        else:
            result = sla.eig_banded(M.to_upper_banded(), lower=False, eigvals_only=eigvals_only, **kwargs)
    except (np.linalg.LinAlgError, sla.LinAlgError) as e:
        raise EigenSolverError(f"symmetric eigensolver failed to converge: {e}") from e
    if eigvals_only:
        return DenseSymEig(np.asarray(result, dtype=float))
    values, vectors = result
    return DenseSymEig(np.asarray(values, dtype=float), np.asarray(vectors, dtype=float))


# ---------------------------------------------------------------------------
# bordered systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BorderedSystem:
    """Square system [[core, columns], [rows, corner]].

    ``core`` is N x N symmetric banded; ``columns`` is N x k, ``rows`` k x N and
    ``corner`` k x k with k the number of borders.
    """
    core: SymBandMatrix
    columns: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    rows: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    corner: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        n = self.core.size
        corner = np.atleast_2d(np.asarray(self.corner, dtype=float))
        if corner.size == 0:
            corner = np.zeros((0, 0))
        if corner.shape[0] != corner.shape[1]:
            raise ValueError(f"corner block must be square, got {corner.shape}")
        k = corner.shape[0]
        columns = np.asarray(self.columns, dtype=float)
        rows = np.asarray(self.rows, dtype=float)
        if columns.size != n * k or rows.size != n * k:
            raise ValueError(f"borders must be {n}x{k} and {k}x{n}, got {columns.shape} and {rows.shape}")
        object.__setattr__(self, "columns", columns.reshape(n, k))
        object.__setattr__(self, "rows", rows.reshape(k, n))
        object.__setattr__(self, "corner", corner)

    @property
    def size(self) -> int:
        return self.core.size + self.borders

    @property
    def borders(self) -> int:
        return self.corner.shape[0]

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> "BorderedSystem":
        """Wrap an arbitrary square matrix (empty core, everything in the corner)."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        k = matrix.shape[0]
        return cls(SymBandMatrix(0, {}), np.zeros((0, k)), np.zeros((k, 0)), matrix)

    def extend(self, column: np.ndarray, row: np.ndarray) -> "BorderedSystem":
        """Append one column (length size) and one row (length size + 1)."""
        n, k = self.core.size, self.borders
        column = np.asarray(column, dtype=float)
        row = np.asarray(row, dtype=float)
        if column.shape != (n + k,) or row.shape != (n + k + 1,):
            raise ValueError(f"extend needs a column of {n + k} and a row of {n + k + 1} entries")
        columns = np.hstack([self.columns, column[:n, None]])
        rows = np.vstack([self.rows, row[None, :n]])
        corner = np.zeros((k + 1, k + 1))
        corner[:k, :k] = self.corner
        corner[:k, k] = column[n:]
        corner[k, :] = row[n:]
        return BorderedSystem(self.core, columns, rows, corner)

    def assemble(self) -> sp.csc_matrix:
        n, k = self.core.size, self.borders
        if n == 0:
            return sp.csc_matrix(self.corner)
        if k == 0:
            return self.core.tosparse("csc")
        return sp.bmat(
            [[self.core.tosparse("csr"), sp.csr_matrix(self.columns)],
             [sp.csr_matrix(self.rows), sp.csr_matrix(self.corner)]],
            format="csc",
        )

    def todense(self) -> np.ndarray:
        return self.assemble().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n = self.core.size
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise ValueError(f"dimension mismatch: system is {self.size}, vector has shape {x.shape}")
        top = (matvec(self.core, x[:n]) if n else np.zeros(0)) + self.columns @ x[n:]
        bottom = self.rows @ x[:n] + self.corner @ x[n:]
        return np.concatenate([top, bottom])


def _permutation_parity(perm: np.ndarray) -> int:
    """+1 for an even permutation, -1 for an odd one."""
    perm = np.asarray(perm)
    seen = np.zeros(perm.size, dtype=bool)
    parity = 1
    for start in range(perm.size):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            parity = -parity
    return parity


class BorderedLU:
    """Sparse LU (SuperLU, partial pivoting) of an assembled bordered system."""

    def __init__(self, system: BorderedSystem, check: bool = True):
        self.system = system
        self.matrix = system.assemble()
        n = self.matrix.shape[0]
        self.scale = float(abs(self.matrix).sum(axis=1).max()) if n else 0.0
        self.singular = False
        self._lu = None
        self._dense_lu = None
        if n == 0:
            self.pivots = np.zeros(0)
            return
        try:
            self._lu = splu(self.matrix)
            self.pivots = self._lu.U.diagonal()
        except RuntimeError as e:  # "Factor is exactly singular"
            self.singular = True
            self.pivots = np.zeros(n)
            if check:
                raise RankDeficiencyError(f"bordered system is exactly singular: {e}", scale=self.scale) from e
            return
        threshold = PIVOT_RTOL * self.scale
        small = np.flatnonzero(np.abs(self.pivots) <= threshold)
        if small.size:
            k = int(small[0])
            if self.pivots[k] == 0.0:
                self.singular = True
            if check:
                col = int(self._lu.perm_c[k]) if self._lu is not None else k
                raise RankDeficiencyError(
                    f"pivot {k} (column {col}) is {self.pivots[k]:.3e}, below {threshold:.3e}",
                    pivot_index=k,
                    pivot=float(self.pivots[k]),
                    scale=self.scale,
                )

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def solve(self, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        if self._lu is None:
            if self.size == 0:
                return np.zeros(0)
            raise RankDeficiencyError("cannot solve with a singular factorization", scale=self.scale)
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.size,):
            raise ValueError(f"dimension mismatch: system is {self.size}, rhs has shape {rhs.shape}")
        return self._lu.solve(rhs, trans="T" if transpose else "N")

    def det_sign(self) -> int:
        if self.size == 0:
            return 1
        if self.singular or self._lu is None or np.any(self.pivots == 0.0):
            return 0
        sign = int(np.prod(np.sign(self.pivots)))
        return sign * _permutation_parity(self._lu.perm_r) * _permutation_parity(self._lu.perm_c)


def factorize(system: BorderedSystem, check: bool = True) -> BorderedLU:
    return BorderedLU(system, check=check)


def solve_bordered(system: Union[BorderedSystem, BorderedLU], rhs: np.ndarray, refine: int = 1) -> np.ndarray:
    """Solve the bordered system; one step of iterative refinement by default."""
    lu = system if isinstance(system, BorderedLU) else factorize(system)
    rhs = np.asarray(rhs, dtype=float)
    x = lu.solve(rhs)
    for _ in range(refine):
        r = rhs - lu.matrix @ x
        x = x + lu.solve(r)
    return x


def det_sign(system: Union[BorderedSystem, BorderedLU]) -> int:
    """Sign of the determinant from pivot signs and permutation parities."""
    lu = system if isinstance(system, BorderedLU) else factorize(system, check=False)
    return lu.det_sign()


def min_singular_estimate(
    system: Union[BorderedSystem, BorderedLU],
    max_iter: int = 30,
    tol: float = 1e-6,
    seed: int = 0,
) -> float:
    """Estimate sigma_min by inverse power iteration on (M^T M)^-1.

    The returned value is an upper bound that tightens with iterations.
    """
    lu = system if isinstance(system, BorderedLU) else factorize(system)
    n = lu.size
    if n == 0:
        return 0.0
    x = np.random.default_rng(seed).standard_normal(n)
    x /= np.linalg.norm(x)
    estimate = np.inf
    for _ in range(max_iter):
        z = lu.solve(lu.solve(x), transpose=True)
        rayleigh = float(x @ z)
        nz = float(np.linalg.norm(z))
        if rayleigh <= 0.0 or nz == 0.0 or not np.isfinite(nz):
            return 0.0
        new_estimate = 1.0 / np.sqrt(rayleigh)
        x = z / nz
        if abs(new_estimate - estimate) <= tol * new_estimate:
            return new_estimate
        estimate = new_estimate
    return float(estimate)
