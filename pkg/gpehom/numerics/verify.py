"""
Independent oracles and property checks (numerics/verify.py)

- damped self-consistent-field (SCF) iteration for the unique positive ground state
- half-domain reduced problem for the antisymmetric first excited state in 1D
- checks on traced results: antisymmetry, positivity, lambda bound, order
  preservation, path separation, residual audit, Jacobian finite-difference audit
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solveh_banded

from gpehom.numerics.discretize import Grid, SymBandMatrix
from gpehom.numerics.homotopy import (
    HomotopyProblem,
    State,
    dH_dt,
    eval_H,
    jacobian_x,
    normalize_sign,
    residual_norm,
)
from gpehom.numerics.linalg import (
    BorderedSystem,
    RankDeficiencyError,
    gershgorin_radius,
    matvec,
    solve_bordered,
)

logger = logging.getLogger("gpehom.verify")

ORDER_CHECKPOINTS = tuple(round(0.1 * k, 1) for k in range(11))
SEPARATION_CHECKPOINTS = ORDER_CHECKPOINTS[:-1]


class OracleError(RuntimeError):
    """Raised when an oracle iteration does not converge."""


@dataclass(frozen=True, eq=False)
class Eigenpair:
    """Solution of the t = 1 problem; ``residual`` is always recomputed."""
    lam: float
    phi: np.ndarray
    residual: float
    flags: Tuple[str, ...] = ()

    def with_flags(self, *flags: str) -> "Eigenpair":
        merged = tuple(dict.fromkeys(self.flags + tuple(flags)))
        return Eigenpair(self.lam, self.phi, self.residual, merged)


def make_eigenpair(p: HomotopyProblem, phi: np.ndarray, lam: float, flags: Sequence[str] = ()) -> Eigenpair:
    phi = np.asarray(phi, dtype=float)
    residual = residual_norm(p, State(phi, float(lam), 1.0))
    return Eigenpair(float(lam), phi, residual, tuple(flags))


@dataclass(frozen=True, eq=False)
class LambdaTrace:
    """Sampled lam(t) of one path."""
    index: int
    t: np.ndarray
    lam: np.ndarray

    def at(self, checkpoints: Sequence[float]) -> np.ndarray:
        """Linear interpolation of lam at ``checkpoints``; NaN outside the sampled range."""
        order = np.argsort(self.t, kind="stable")
        t, lam = self.t[order], self.lam[order]
        cp = np.asarray(checkpoints, dtype=float)
        out = np.interp(cp, t, lam)
        out[(cp < t[0]) | (cp > t[-1])] = np.nan
        return out


TraceLike = Union[LambdaTrace, Any]


def as_trace(path: TraceLike) -> LambdaTrace:
    """Accept a LambdaTrace or anything with ``lambda_trace()`` (a PathResult)."""
    if isinstance(path, LambdaTrace):
        return path
    return path.lambda_trace()


@dataclass
class CheckReport:
    name: str
    passed: bool
    applicable: bool = True
    hard: bool = True
    message: str = ""
    details: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def not_applicable(cls, name: str, message: str, hard: bool = True) -> "CheckReport":
        return cls(name=name, passed=True, applicable=False, hard=hard, message=message)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "applicable": bool(self.applicable),
            "hard": bool(self.hard),
            "message": self.message,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# SCF oracle
# ---------------------------------------------------------------------------

def _positive_shift(M: SymBandMatrix) -> float:
    """Diagonal shift that makes M strictly diagonally dominant if it is not."""
    rows = M.bands[0].copy()
    for k, values in M.bands.items():
        if k == 0:
            continue
        rows[:-k] -= np.abs(values)
        rows[k:] -= np.abs(values)
    lower = float(rows.min()) if rows.size else 0.0
    return 0.0 if lower > 0.0 else 1.0 - lower


def _nonlinear_residual(M: SymBandMatrix, beta: float, c: float, phi: np.ndarray, lam: float) -> float:
    top = matvec(M, phi) + beta * phi ** 3 - lam * phi
    return float(max(np.max(np.abs(top)), abs(0.5 * (c - phi @ phi))))


def _rayleigh(M: SymBandMatrix, beta: float, c: float, phi: np.ndarray) -> float:
    return float((phi @ matvec(M, phi) + beta * np.sum(phi ** 4)) / c)


def _newton_polish(M: SymBandMatrix, beta: float, c: float, phi: np.ndarray, lam: float,
                   tol: float, max_iter: int = 10) -> Tuple[np.ndarray, float, float]:
    res = _nonlinear_residual(M, beta, c, phi, lam)
    for _ in range(max_iter):
        if res <= tol:
            break
        core = M.shifted(3.0 * beta * phi ** 2 - lam)
        system = BorderedSystem(core, -phi[:, None], -phi[None, :], np.zeros((1, 1)))
        rhs = -np.append(matvec(M, phi) + beta * phi ** 3 - lam * phi, 0.5 * (c - phi @ phi))
        try:
            delta = solve_bordered(system, rhs)
        except RankDeficiencyError:
            break
        trial_phi, trial_lam = phi + delta[:-1], lam + float(delta[-1])
        trial_res = _nonlinear_residual(M, beta, c, trial_phi, trial_lam)
        if not trial_res < res:
            break
        phi, lam, res = trial_phi, trial_lam, trial_res
    return phi, lam, res


def _scf_positive(
    M: SymBandMatrix,
    beta: float,
    c: float,
    tol: float,
    max_iter: int,
    alpha: float,
    polish_rtol: float = 1e-6,
) -> Tuple[np.ndarray, float, float, int]:
    """Positive solution of M phi + beta phi^3 = lam phi, phi^T phi = c.

    Damped fixed point phi <- normalize((1 - alpha) phi + alpha normalize(K(phi)^-1 phi)),
    K(phi) = M + beta diag(phi^2) + shift I, started from a constant positive vector.
    """
    n = M.size
    shift = _positive_shift(M)
    scale = max(1.0, gershgorin_radius(M))
    phi = np.full(n, np.sqrt(c / n))
    lam = _rayleigh(M, beta, c, phi)
    res = _nonlinear_residual(M, beta, c, phi, lam)
    for it in range(1, max_iter + 1):
        K = M.shifted(beta * phi ** 2 + shift)
        y = solveh_banded(K.to_upper_banded(), phi, lower=False)
        y *= np.sqrt(c) / np.linalg.norm(y)
        mixed = (1.0 - alpha) * phi + alpha * y
        phi = mixed * (np.sqrt(c) / np.linalg.norm(mixed))
        lam = _rayleigh(M, beta, c, phi)
        res = _nonlinear_residual(M, beta, c, phi, lam)
        if res <= polish_rtol * scale:
            pphi, plam, pres = _newton_polish(M, beta, c, phi, lam, tol)
            if pres <= tol and np.all(pphi > 0):
                return pphi, plam, pres, it
        if res <= tol:
            return phi, lam, res, it
    raise OracleError(f"SCF iteration did not converge in {max_iter} iterations (residual {res:.3e})")


def scf_ground_state(
    p: HomotopyProblem,
    tol: float = 1e-9,
    max_iter: int = 5000,
    alpha: float = 0.5,
) -> Eigenpair:
    """Unique positive eigenvector of the t = 1 problem by damped SCF."""
    if p.beta < 0:
        raise ValueError("the SCF oracle requires beta >= 0")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"mixing parameter must lie in (0, 1], got {alpha}")
    phi, lam, res, iterations = _scf_positive(p.D, p.beta, p.c, tol, max_iter, alpha)
    logger.info(f"SCF ground state: lam={lam:.10g}, residual={res:.3e}, iterations={iterations}")
    return make_eigenpair(p, phi, lam, ("positive",))


def half_domain_operator(D: SymBandMatrix) -> SymBandMatrix:
    """Reduced operator on the left half of a symmetric 1D grid.

    Odd n pins the middle node to zero; even n folds the coupling to the
    mirrored node into the last diagonal entry.
    """
    if D.bandwidth > 1:
        raise ValueError("half-domain reduction needs a tridiagonal 1D operator")
    n = D.size
    k = n // 2
    if k == 0:
        raise ValueError("half-domain reduction needs n >= 2")
    diag = D.bands[0][:k].copy()
    off = D.band(1)
    if n % 2 == 0:
        diag[-1] -= off[k - 1]
    return SymBandMatrix(k, {0: diag, 1: off[:k - 1]})


def mirror_antisymmetric(half: np.ndarray, n: int) -> np.ndarray:
    middle = [0.0] if n % 2 else []
    return np.concatenate([half, middle, -half[::-1]])


def antisymmetric_state(
    p: HomotopyProblem,
    tol: float = 1e-9,
    max_iter: int = 5000,
    alpha: float = 0.5,
) -> Eigenpair:
    """Antisymmetric solution on a symmetric interval, positive on the left half."""
    if not p.spec.symmetric_interval:
        raise ValueError("antisymmetric reference requires a 1D symmetric interval")
    M = half_domain_operator(p.D)
    half, lam, res, iterations = _scf_positive(M, p.beta, p.c / 2.0, tol, max_iter, alpha)
    phi = normalize_sign(mirror_antisymmetric(half, p.size))
    logger.info(f"Half-domain antisymmetric state: lam={lam:.10g}, residual={res:.3e}, iterations={iterations}")
    return make_eigenpair(p, phi, lam, ("antisymmetric",))


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def _is_symmetric_axis(x: np.ndarray) -> bool:
    return bool(np.allclose(x, -x[::-1], rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(x))))))


def check_antisymmetric(e: Eigenpair, grid: Grid, tol: float = 1e-8) -> CheckReport:
    name = "antisymmetry"
    if grid.dim != 1 or not _is_symmetric_axis(grid.axes[0]):
        return CheckReport.not_applicable(name, "not applicable: needs a 1D symmetric interval")
    phi = np.asarray(e.phi, dtype=float)
    norm_inf = float(np.max(np.abs(phi)))
    gap = float(np.max(np.abs(phi + phi[::-1]))) / norm_inf if norm_inf > 0 else np.inf
    half = phi[: phi.size // 2]
    one_signed = bool(np.all(half > 0) or np.all(half < 0))
    passed = gap <= tol
    return CheckReport(
        name=name,
        passed=passed,
        message=f"max |phi_j + phi_(n+1-j)| / |phi|_inf = {gap:.3e}",
        details={"gap": gap, "tol": tol, "first_half_one_signed": one_signed},
    )


def check_positive(e: Eigenpair) -> CheckReport:
    phi = np.asarray(e.phi, dtype=float)
    passed = bool(phi.size and (np.all(phi > 0) or np.all(phi < 0)))
    return CheckReport(
        name="positivity",
        passed=passed,
        message="strictly one-signed" if passed else "eigenvector changes sign or vanishes",
        details={"min": float(phi.min()), "max": float(phi.max())},
    )


def check_bound(path: TraceLike, p: HomotopyProblem) -> CheckReport:
    """Every sampled |lam| <= rho_G(A) + rho_G(D) + beta c."""
    trace = as_trace(path)
    bound = p.lambda_bound
    worst = float(np.max(np.abs(trace.lam))) if trace.lam.size else 0.0
    passed = worst <= bound * (1.0 + 1e-12)
    return CheckReport(
        name="bound",
        passed=passed,
        message=f"path {trace.index}: max |lam| = {worst:.6g}, bound = {bound:.6g}",
        details={"path": trace.index, "max_abs_lambda": worst, "bound": bound},
    )


def _checkpoint_matrix(traces: Sequence[LambdaTrace], checkpoints: Sequence[float]) -> np.ndarray:
    return np.vstack([tr.at(checkpoints) for tr in traces])


def check_order_preservation(
    paths: Sequence[TraceLike],
    checkpoints: Sequence[float] = ORDER_CHECKPOINTS,
    tie_tol: float = 1e-8,
) -> CheckReport:
    """Is the lam-ranking of paths at every checkpoint the initial ranking?"""
    name = "order_preservation"
    traces = [as_trace(pt) for pt in paths]
    if len(traces) < 2:
        return CheckReport(name=name, passed=True, hard=False, message="fewer than two paths: trivially preserved")
    values = _checkpoint_matrix(traces, checkpoints)
    initial = np.array([tr.lam[np.argmin(tr.t)] for tr in traces])
    order = np.argsort(initial, kind="stable")
    violations: List[float] = []
    skipped: List[float] = []
    for j, t in enumerate(checkpoints):
        column = values[order, j]
        if np.any(np.isnan(column)):
            skipped.append(float(t))
            continue
        if np.any(np.diff(column) < -tie_tol):
            violations.append(float(t))
    passed = not violations
    message = "ranking preserved" if passed else f"ranking changes at t = {violations}"
    return CheckReport(
        name=name,
        passed=passed,
        hard=False,
        message=message,
        details={"violations": violations, "skipped": skipped, "paths": [tr.index for tr in traces]},
    )


def check_path_separation(
    paths: Sequence[TraceLike],
    checkpoints: Sequence[float] = SEPARATION_CHECKPOINTS,
    min_separation: float = 1e-8,
) -> CheckReport:
    """Distinct paths keep distinct lam at every common checkpoint with t < 1."""
    name = "path_separation"
    traces = [as_trace(pt) for pt in paths]
    if len(traces) < 2:
        return CheckReport(name=name, passed=True, hard=False, message="fewer than two paths")
    values = _checkpoint_matrix(traces, checkpoints)
    worst = np.inf
    worst_t: Optional[float] = None
    for j, t in enumerate(checkpoints):
        column = values[:, j]
        column = np.sort(column[~np.isnan(column)])
        if column.size < 2:
            continue
        sep = float(np.min(np.diff(column)))
        if sep < worst:
            worst, worst_t = sep, float(t)
    passed = bool(worst > min_separation)
    return CheckReport(
        name=name,
        passed=passed,
        hard=False,
        message=f"minimum separation {worst:.3e} at t = {worst_t}",
        details={"min_separation": float(worst), "at_t": worst_t, "threshold": min_separation},
    )


def audit_residuals(p: HomotopyProblem, pairs: Mapping[int, Eigenpair], newton_tol: float) -> CheckReport:
    """Recompute the t = 1 residual of every pair and compare with 10 newton_tol."""
    limit = 10.0 * newton_tol
    residuals = {int(k): residual_norm(p, State(e.phi, e.lam, 1.0)) for k, e in pairs.items()}
    failed = sorted(k for k, r in residuals.items() if not r <= limit)
    worst = max(residuals.values()) if residuals else 0.0
    return CheckReport(
        name="residual",
        passed=not failed,
        message=f"max residual {worst:.3e} (limit {limit:.1e})" + (f"; failing paths {failed}" if failed else ""),
        details={"residuals": {str(k): v for k, v in residuals.items()}, "limit": limit, "failed": failed},
    )


def scf_cross_check(reference: Eigenpair, traced: Eigenpair, rtol: float = 1e-6) -> CheckReport:
    """Agreement of lam and phi (up to sign) between the SCF oracle and a traced path."""
    dlam = abs(reference.lam - traced.lam)
    dist = min(np.linalg.norm(reference.phi - traced.phi), np.linalg.norm(reference.phi + traced.phi))
    tol_phi = rtol * float(np.linalg.norm(reference.phi))
    passed = bool(dlam <= rtol and dist <= tol_phi)
    return CheckReport(
        name="scf_cross_check",
        passed=passed,
        message=f"|dlam| = {dlam:.3e}, eigenvector distance = {dist:.3e}",
        details={"scf_lambda": reference.lam, "path_lambda": traced.lam, "dlam": dlam, "distance": float(dist)},
    )


def jacobian_fd_audit(p: HomotopyProblem, samples: int = 100, seed: int = 0,
                      full_coordinate_limit: int = 200) -> float:
    """Worst relative error of H_x and H_t against central differences of eval_H."""
    rng = np.random.default_rng(seed)
    N = p.size
    worst = 0.0
    for _ in range(samples):
        phi = rng.standard_normal(N)
        lam = float(rng.uniform(0.0, max(p.rho_D, 1.0)))
        t = float(rng.uniform(0.0, 1.0))
        s = State(phi, lam, t)
        x = s.x
        eps = 1e-6 * (1.0 + float(np.max(np.abs(x))))

        def H_at(xx: np.ndarray, tt: float) -> np.ndarray:
            return eval_H(p, State(xx[:-1], float(xx[-1]), tt))

        J = jacobian_x(p, s)
        if N <= full_coordinate_limit:
            dense = J.todense()
            scale = max(1.0, float(np.max(np.abs(dense))))
            fd = np.empty_like(dense)
            for j in range(N + 1):
                step = np.zeros(N + 1)
                step[j] = eps
                fd[:, j] = (H_at(x + step, t) - H_at(x - step, t)) / (2 * eps)
            err_x = float(np.max(np.abs(fd - dense))) / scale
        else:
            err_x = 0.0
            for _ in range(8):
                d = rng.standard_normal(N + 1)
                d /= np.linalg.norm(d)
                an = J.matvec(d)
                fd = (H_at(x + eps * d, t) - H_at(x - eps * d, t)) / (2 * eps)
                err_x = max(err_x, float(np.max(np.abs(fd - an))) / max(1.0, float(np.max(np.abs(an)))))
        ht = dH_dt(p, s)
        fd_t = (H_at(x, t + eps) - H_at(x, t - eps)) / (2 * eps)
        err_t = float(np.max(np.abs(fd_t - ht))) / max(1.0, float(np.max(np.abs(ht))))
        worst = max(worst, err_x, err_t)
    logger.debug(f"Jacobian audit over {samples} states: worst relative error {worst:.3e}")
    return worst
