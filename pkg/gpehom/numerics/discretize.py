"""
Finite-difference discretization (numerics/discretize.py)

Builds interior grids, the symmetric banded operator D = -1/2 Laplacian + V and
the normalization constant c (1/h in 1D, 1/(h1 h2) in 2D) for Dirichlet problems
on an interval or a rectangle. Unknowns are numbered row-major with the y index
innermost, i.e. Gamma(i, j) = j + (i - 1) n.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from gpehom.core.models import ProblemSpec


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior nodes of a uniform mesh."""
    dim: int
    h: Tuple[float, ...]
    axes: Tuple[np.ndarray, ...]
    points: np.ndarray  # (N, dim), row-major
    c: float

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    def index(self, i: int, j: int = 1) -> int:
        """1-based Gamma(i, j) -> 0-based position in the unknown vector."""
        if self.dim == 1:
            return i - 1
        return (j - 1) + (i - 1) * self.shape[1]


@dataclass(frozen=True, eq=False)
class SymBandMatrix:
    """Symmetric banded matrix stored by its nonnegative diagonal offsets.

    ``bands[k]`` holds the entries M[i, i + k], i = 0..N-k-1; the lower part is
    implied by symmetry.
    """
    size: int
    bands: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        cleaned: Dict[int, np.ndarray] = {}
        for k, values in self.bands.items():
            k = int(k)
            arr = np.array(values, dtype=float)
            if k < 0:
                raise ValueError(f"offsets must be nonnegative, got {k}")
            if k >= max(self.size, 1) and k != 0:
                continue
            if arr.shape != (self.size - k,):
                raise ValueError(f"offset {k} needs {self.size - k} values, got {arr.shape}")
            arr.setflags(write=False)
            cleaned[k] = arr
        if 0 not in cleaned:
            zeros = np.zeros(self.size)
            zeros.setflags(write=False)
            cleaned[0] = zeros
        object.__setattr__(self, "bands", dict(sorted(cleaned.items())))

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(self.bands.keys())

    @property
    def bandwidth(self) -> int:
        return max(self.offsets)

    def band(self, k: int) -> np.ndarray:
        if k in self.bands:
            return self.bands[k]
        return np.zeros(max(self.size - k, 0))

    def diagonal(self) -> np.ndarray:
        return self.bands[0]

    def todense(self) -> np.ndarray:
        out = np.diag(self.bands[0]).astype(float)
        for k, values in self.bands.items():
            if k == 0:
                continue
            out += np.diag(values, k) + np.diag(values, -k)
        return out

    def tosparse(self, format: str = "csc") -> sp.spmatrix:
        diagonals, offsets = [], []
        for k, values in self.bands.items():
            diagonals.append(values)
            offsets.append(k)
            if k:
                diagonals.append(values)
                offsets.append(-k)
        return sp.diags(diagonals, offsets, shape=(self.size, self.size), format=format)

    def to_upper_banded(self) -> np.ndarray:
        """LAPACK upper band storage (row ``bw - k`` holds offset ``k``)."""
        bw = self.bandwidth
        ab = np.zeros((bw + 1, self.size))
        for k, values in self.bands.items():
            ab[bw - k, k:] = values
        return ab

    def shifted(self, diag: np.ndarray | float) -> "SymBandMatrix":
        """Same matrix with ``diag`` added to the main diagonal."""
        bands = dict(self.bands)
        bands[0] = self.bands[0] + diag
        return SymBandMatrix(self.size, bands)

    @classmethod
    def combine(cls, terms: Iterable[Tuple[float, "SymBandMatrix"]],
                diag: Optional[np.ndarray | float] = None) -> "SymBandMatrix":
        """sum(alpha * M) over ``terms``, plus an optional diagonal."""
        terms = list(terms)
        if not terms:
            raise ValueError("combine needs at least one term")
        size = terms[0][1].size
        bands: Dict[int, np.ndarray] = {}
        for alpha, mat in terms:
            if mat.size != size:
                raise ValueError(f"dimension mismatch: {mat.size} != {size}")
            for k, values in mat.bands.items():
                bands[k] = bands[k] + alpha * values if k in bands else alpha * values
        if diag is not None:
            bands[0] = bands.get(0, np.zeros(size)) + diag
        return cls(size, bands)

    @classmethod
    def from_diagonal(cls, values: np.ndarray) -> "SymBandMatrix":
        values = np.asarray(values, dtype=float)
        return cls(values.size, {0: values})


def harmonic_potential(points: np.ndarray) -> np.ndarray:
    """V(x) = 1/2 |x|^2."""
    return 0.5 * np.sum(points ** 2, axis=1)


def build_grid(spec: ProblemSpec) -> Grid:
    """Interior nodes, mesh sizes and normalization constant for ``spec``."""
    if spec.dim == 1:
        a, b = spec.domain
        h = (b - a) / (spec.n + 1)
        x = a + h * np.arange(1, spec.n + 1)
        return Grid(dim=1, h=(h,), axes=(x,), points=x[:, None].copy(), c=1.0 / h)

    a, b, c_lo, d = spec.domain
    m, n = int(spec.m), spec.n
    h1 = (b - a) / (m + 1)
    h2 = (d - c_lo) / (n + 1)
    x = a + h1 * np.arange(1, m + 1)
    y = c_lo + h2 * np.arange(1, n + 1)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    points = np.column_stack([xx.ravel(), yy.ravel()])
    return Grid(dim=2, h=(h1, h2), axes=(x, y), points=points, c=1.0 / (h1 * h2))


def potential_values(spec: ProblemSpec, grid: Grid) -> np.ndarray:
    if spec.potential == "tabulated":
        return np.asarray(spec.potential_values, dtype=float)
    return harmonic_potential(grid.points)


def build_operator(spec: ProblemSpec, grid: Grid) -> SymBandMatrix:
    """D = 1/2 D1 + V as a symmetric banded matrix.

    1D: offsets {0, 1}. 2D: offsets {0, 1, n}; offset 1 couples y-neighbours and
    is zero across block boundaries, offset n couples x-neighbours.
    """
    v = potential_values(spec, grid)
    if spec.dim == 1:
        (h,) = grid.h
        diag = 1.0 / h ** 2 + v
        off = np.full(spec.n - 1, -0.5 / h ** 2)
        return SymBandMatrix(spec.n, {0: diag, 1: off})

    h1, h2 = grid.h
    m, n = int(spec.m), spec.n
    size = m * n
    diag = 1.0 / h1 ** 2 + 1.0 / h2 ** 2 + v
    bands: Dict[int, np.ndarray] = {0: diag}
    if size > 1:
        off1 = np.full(size - 1, -0.5 / h2 ** 2)
        off1[n - 1::n] = 0.0
        bands[1] = off1
    if m > 1:
        offn = np.full(size - n, -0.5 / h1 ** 2)
        bands[n] = bands[n] + offn if n in bands else offn
    return SymBandMatrix(size, bands)


def block_boundary_mask(size: int, n: int) -> np.ndarray:
    """True at offset-1 positions that connect two different y-blocks."""
    mask = np.zeros(max(size - 1, 0), dtype=bool)
    mask[n - 1::n] = True
    return mask
