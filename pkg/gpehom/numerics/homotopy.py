"""
Randomized homotopy for the discrete GPE eigenproblem (numerics/homotopy.py)

H(phi, lam, t) = [ (1-t) A phi + D phi + t beta phi^3 - lam phi ;  1/2 (c - phi^T phi) ]

A is a structured random matrix whose nonzero pattern matches D. At t = 0 the
problem is the linear eigenproblem of A + D; at t = 1 it is the target problem.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gpehom.core.models import ProblemSpec
from gpehom.numerics.discretize import (
    Grid,
    SymBandMatrix,
    block_boundary_mask,
    build_grid,
    build_operator,
)
from gpehom.numerics.linalg import (
    DEFAULT_DENSE_CAP,
    BorderedSystem,
    RankDeficiencyError,
    gershgorin_radius,
    matvec,
    solve_bordered,
    sym_eigen_full,
)

logger = logging.getLogger("gpehom.homotopy")

GAP_RTOL = 1e-8
MAX_SAMPLE_ATTEMPTS = 10
DEFAULT_SIGMA_FRACTION = 0.05


class SamplingError(ValueError):
    """Raised when no admissible random matrix was found."""


class RandomMatrixKind(str, Enum):
    DIAG_1D = "diag"
    BLOCK_TRIDIAG_2D = "blocktridiag"
    PENTADIAG_2D = "pentadiag"

    @property
    def dim(self) -> int:
        return 1 if self is RandomMatrixKind.DIAG_1D else 2

    @classmethod
    def default_for(cls, dim: int) -> "RandomMatrixKind":
        return cls.DIAG_1D if dim == 1 else cls.BLOCK_TRIDIAG_2D

    @classmethod
    def resolve(cls, kind, dim: int) -> "RandomMatrixKind":
        resolved = cls.default_for(dim) if kind is None else cls(kind)
        if resolved.dim != dim:
            raise ValueError(f"random matrix kind '{resolved.value}' is not valid for dim={dim}")
        return resolved


@dataclass(frozen=True, eq=False)
class State:
    """A point (phi, lam, t) on or near a homotopy path."""
    phi: np.ndarray
    lam: float
    t: float

    @property
    def x(self) -> np.ndarray:
        """(phi, lam) as one vector of length N + 1."""
        return np.append(self.phi, self.lam)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.phi, [self.lam, self.t]])

    @classmethod
    def from_vector(cls, z: np.ndarray) -> "State":
        z = np.asarray(z, dtype=float)
        return cls(phi=z[:-2].copy(), lam=float(z[-2]), t=float(z[-1]))


@dataclass(frozen=True, eq=False)
class HomotopyProblem:
    """Immutable homotopy data; shared read-only between path workers."""
    spec: ProblemSpec
    grid: Grid
    D: SymBandMatrix
    A: SymBandMatrix
    beta: float
    c: float
    seed: int
    sigma: float
    kind: RandomMatrixKind = RandomMatrixKind.DIAG_1D
    attempt: int = 0

    @property
    def size(self) -> int:
        return self.D.size

    @cached_property
    def A_plus_D(self) -> SymBandMatrix:
        return SymBandMatrix.combine([(1.0, self.A), (1.0, self.D)])

    @cached_property
    def rho_A(self) -> float:
        return gershgorin_radius(self.A)

    @cached_property
    def rho_D(self) -> float:
        return gershgorin_radius(self.D)

    @property
    def lambda_bound(self) -> float:
        """rho_G(A) + rho_G(D) + beta c bounds |lam| along every path."""
        return self.rho_A + self.rho_D + self.beta * self.c

    def operator_at(self, t: float) -> SymBandMatrix:
        """(1 - t) A + D."""
        return SymBandMatrix.combine([(1.0 - t, self.A), (1.0, self.D)])


def _coupling_caps(D: SymBandMatrix, block: int) -> Dict[int, float]:
    """Largest admissible positive entry per random off-diagonal band.

    Half of D's weakest coupling in that band, so every off-diagonal entry of
    (1 - t) A + D stays negative for t in [0, 1].
    """
    caps = {}
    for k in (1, block):
        if k in D.offsets:
            band = np.abs(D.band(k))
            band = band[band > 0]
            caps[k] = 0.5 * float(band.min()) if band.size else 0.0
    return caps


def _draw_couplings(count: int, sigma: float, cap: float, rng: np.random.Generator) -> np.ndarray:
    """|entry| uniform on [sigma/10, sigma] with a fair random sign; positive entries clipped to ``cap``."""
    magnitude = rng.uniform(sigma / 10.0, sigma, count)
    sign = rng.choice((-1.0, 1.0), count)
    return np.minimum(sign * magnitude, cap)


def _draw_A(size: int, block: int, kind: RandomMatrixKind, sigma: float,
            rng: np.random.Generator, caps: Optional[Dict[int, float]] = None) -> SymBandMatrix:
    caps = caps or {}
    diag = rng.uniform(-sigma, sigma, size)
    if kind is RandomMatrixKind.DIAG_1D:
        return SymBandMatrix(size, {0: diag})
    bands = {0: diag}
    if size > 1:
        off1 = _draw_couplings(size - 1, sigma, caps.get(1, sigma), rng)
        off1[block_boundary_mask(size, block)] = 0.0
        bands[1] = off1
    if kind is RandomMatrixKind.PENTADIAG_2D and size > block:
        offn = _draw_couplings(size - block, sigma, caps.get(block, sigma), rng)
        bands[block] = bands[block] + offn if block in bands else offn
    return SymBandMatrix(size, bands)


def eigen_gap(values: np.ndarray) -> Tuple[float, int]:
    """Smallest gap between consecutive ascending values and its position."""
    if values.size < 2:
        return float(np.inf), -1
    d = np.diff(values)
    k = int(np.argmin(d))
    return float(d[k]), k


def sample_A(
    spec: ProblemSpec,
    grid: Grid,
    kind,
    seed: int,
    sigma: float,
    D: Optional[SymBandMatrix] = None,
    dense_cap: int = DEFAULT_DENSE_CAP,
    return_attempt: bool = False,
):
    """Draw A with the structure of ``kind``; resample until A + D has simple eigenvalues.

    Attempt k uses ``np.random.default_rng(seed + k)``.
    """
    kind = RandomMatrixKind.resolve(kind, spec.dim)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if D is None:
        D = build_operator(spec, grid)
    block = spec.n
    caps = _coupling_caps(D, block)
    for attempt in range(MAX_SAMPLE_ATTEMPTS):
        A = _draw_A(D.size, block, kind, sigma, np.random.default_rng(seed + attempt), caps)
        if sigma == 0.0:
            logger.warning("sigma = 0: A is the zero matrix and the eigen-gap check is skipped")
            return (A, attempt) if return_attempt else A
        AD = SymBandMatrix.combine([(1.0, A), (1.0, D)])
        w = sym_eigen_full(AD, eigvals_only=True, dense_cap=dense_cap).eigenvalues
        gap, _ = eigen_gap(w)
        gap_tol = GAP_RTOL * gershgorin_radius(AD)
        if gap > gap_tol:
            if attempt:
                logger.info(f"Accepted random matrix on attempt {attempt + 1} (seed {seed + attempt})")
            return (A, attempt) if return_attempt else A
        logger.warning(f"Eigen-gap {gap:.3e} <= {gap_tol:.3e} for seed {seed + attempt}, resampling")
    raise SamplingError(
        f"no random matrix with simple spectrum after {MAX_SAMPLE_ATTEMPTS} attempts "
        f"(sigma={sigma}); try a larger sigma"
    )


def build_problem(
    spec: ProblemSpec,
    kind=None,
    seed: int = 0,
    sigma: Optional[float] = None,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> HomotopyProblem:
    """Discretize ``spec`` and sample the random start matrix."""
    grid = build_grid(spec)
    D = build_operator(spec, grid)
    kind = RandomMatrixKind.resolve(kind, spec.dim)
    if sigma is None:
        sigma = DEFAULT_SIGMA_FRACTION * gershgorin_radius(D)
    if spec.dim == 2 and not (int(spec.m) >= spec.n >= 6):
        logger.warning(f"2D grid m={spec.m}, n={spec.n} is outside m >= n >= 6; path regularity is not guaranteed")
    A, attempt = sample_A(spec, grid, kind, seed, sigma, D=D, dense_cap=dense_cap, return_attempt=True)
    problem = HomotopyProblem(
        spec=spec, grid=grid, D=D, A=A, beta=float(spec.beta), c=grid.c,
        seed=seed, sigma=float(sigma), kind=kind, attempt=attempt,
    )
    logger.info(
        f"Homotopy problem ready - dim={spec.dim}, N={problem.size}, beta={problem.beta}, "
        f"kind={kind.value}, sigma={problem.sigma:.4g}, seed={seed}"
    )
    return problem


# ---------------------------------------------------------------------------
# H and its derivatives
# ---------------------------------------------------------------------------

def eval_H(p: HomotopyProblem, s: State) -> np.ndarray:
    phi = np.asarray(s.phi, dtype=float)
    if phi.shape != (p.size,):
        raise ValueError(f"dimension mismatch: problem has N={p.size}, phi has shape {phi.shape}")
    t = s.t
    top = (1.0 - t) * matvec(p.A, phi) + matvec(p.D, phi) + t * p.beta * phi ** 3 - s.lam * phi
    return np.append(top, 0.5 * (p.c - phi @ phi))


def residual_norm(p: HomotopyProblem, s: State) -> float:
    """max-norm of H."""
    return float(np.max(np.abs(eval_H(p, s))))


def jacobian_x(p: HomotopyProblem, s: State) -> BorderedSystem:
    """d H / d (phi, lam) as a bordered system with a banded core."""
    phi = np.asarray(s.phi, dtype=float)
    t = s.t
    core = SymBandMatrix.combine(
        [(1.0 - t, p.A), (1.0, p.D)],
        diag=3.0 * t * p.beta * phi ** 2 - s.lam,
    )
    return BorderedSystem(core, -phi[:, None], -phi[None, :], np.zeros((1, 1)))


def dH_dt(p: HomotopyProblem, s: State) -> np.ndarray:
    phi = np.asarray(s.phi, dtype=float)
    return np.append(p.beta * phi ** 3 - matvec(p.A, phi), 0.0)


def augmented_system(p: HomotopyProblem, s: State, v: np.ndarray, tau: float) -> BorderedSystem:
    """[[H_x, H_t], [v^T, tau]], the square system used by tangents and correctors."""
    return jacobian_x(p, s).extend(dH_dt(p, s), np.append(v, tau))


def lambda_identity(p: HomotopyProblem, s: State) -> float:
    """(1/c) (phi^T ((1-t) A + D) phi + t beta phi^T phi^3); equals lam on the path."""
    phi = s.phi
    quad = (1.0 - s.t) * phi @ matvec(p.A, phi) + phi @ matvec(p.D, phi)
    return float((quad + s.t * p.beta * np.sum(phi ** 4)) / p.c)


def normalize_sign(phi: np.ndarray) -> np.ndarray:
    """Flip so the largest-magnitude component is positive."""
    phi = np.asarray(phi, dtype=float)
    if phi.size and phi[np.argmax(np.abs(phi))] < 0:
        return -phi
    return phi.copy()


def newton_fixed_t(p: HomotopyProblem, s: State, steps: int, tol: float) -> State:
    """Plain Newton on H(., ., t) = 0 with t frozen; keeps the best iterate."""
    best, best_res = s, residual_norm(p, s)
    for _ in range(steps):
        if best_res <= 0.1 * tol:
            break
        try:
            delta = solve_bordered(jacobian_x(p, best), -eval_H(p, best))
        except RankDeficiencyError:
            break
        trial = State(best.phi + delta[:-1], best.lam + float(delta[-1]), best.t)
        trial_res = residual_norm(p, trial)
        if not trial_res < best_res:
            break
        best, best_res = trial, trial_res
    return best


def initial_states(
    p: HomotopyProblem,
    which: Sequence[int],
    polish_steps: int = 3,
    tol: float = 1e-10,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> List[State]:
    """Start points at t = 0 for the 1-based eigenpair indices in ``which``."""
    which = [int(k) for k in which]
    if not which:
        return []
    bad = [k for k in which if not 1 <= k <= p.size]
    if bad:
        raise ValueError(f"path indices {bad} outside 1..{p.size}")
    lo, hi = min(which) - 1, max(which) - 1
    eig = sym_eigen_full(p.A_plus_D, select=(lo, hi), dense_cap=dense_cap)
    scale = np.sqrt(p.c)
    states: List[State] = []
    for k in which:
        col = k - 1 - lo
        phi = normalize_sign(eig.eigenvectors[:, col] * scale)
        s = State(phi, float(eig.eigenvalues[col]), 0.0)
        s = newton_fixed_t(p, s, polish_steps, tol)
        res = residual_norm(p, s)
        if res > tol:
            logger.warning(f"Initial state {k} residual {res:.3e} above {tol:.1e}")
        states.append(State(normalize_sign(s.phi), s.lam, 0.0))
    return states
