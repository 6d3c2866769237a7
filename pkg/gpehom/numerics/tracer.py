"""
Predictor-corrector path tracing (numerics/tracer.py)

Euler predictor along the unit tangent, Newton corrector on the hyperplane
orthogonal to the tangent, angle-based step control and a t = 1 endgame.
Orientation along a path is fixed by the sign of det [H_x H_t; tangent^T].
"""
from __future__ import annotations
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from gpehom.core.models import TraceConfig
from gpehom.numerics.homotopy import (
    HomotopyProblem,
    State,
    augmented_system,
    eval_H,
    initial_states,
    lambda_identity,
    normalize_sign,
    residual_norm,
)
from gpehom.numerics.linalg import (
    BorderedLU,
    RankDeficiencyError,
    factorize,
    min_singular_estimate,
    solve_bordered,
)
from gpehom.numerics.verify import Eigenpair, LambdaTrace, make_eigenpair

logger = logging.getLogger("gpehom.tracer")

SIGMA_MIN_WARN_RTOL = 1e-10


class PathSingularityError(RuntimeError):
    """The tangent system lost rank."""

    def __init__(self, message: str, sigma_min: float = 0.0):
        super().__init__(message)
        self.sigma_min = sigma_min


@dataclass(frozen=True, eq=False)
class Tangent:
    dot_phi: np.ndarray
    dot_lambda: float
    dot_t: float
    ori: int
    sigma_min: Optional[float] = None
    flipped: bool = False

    @property
    def vector(self) -> np.ndarray:
        """(dot_phi, dot_lambda, dot_t)."""
        return np.concatenate([self.dot_phi, [self.dot_lambda, self.dot_t]])

    @property
    def dot_x(self) -> np.ndarray:
        return np.append(self.dot_phi, self.dot_lambda)

    def angle_deg(self, other: "Tangent") -> float:
        cos = float(np.clip(self.vector @ other.vector, -1.0, 1.0))
        return float(np.degrees(np.arccos(cos)))


@dataclass(frozen=True, eq=False)
class Prediction:
    phi: np.ndarray
    lam: float
    t: float
    ds: float
    clamped: bool = False

    @property
    def state(self) -> State:
        return State(self.phi, self.lam, self.t)


@dataclass(frozen=True, eq=False)
class CorrectorResult:
    success: bool
    state: Optional[State]
    iterations: int
    residual: float
    reason: str = ""
    history: Tuple[float, ...] = ()


@dataclass(frozen=True)
class PathSample:
    """Diagnostics of one accepted point; step 0 is the start point."""
    step: int
    t: float
    lam: float
    ds: float
    theta_deg: float
    sigma_min: float
    residual: float
    norm_gap: float
    identity_gap: float


@dataclass(eq=False)
class PathResult:
    index: int
    status: str
    initial_lambda: float
    eigenpair: Optional[Eigenpair] = None
    last_state: Optional[State] = None
    samples: List[PathSample] = field(default_factory=list)
    steps: int = 0
    corrector_rejects: int = 0
    angle_rejects: int = 0
    orientation_flips: int = 0
    message: str = ""
    states: List[np.ndarray] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == "converged"

    @property
    def lam(self) -> Optional[float]:
        return None if self.eigenpair is None else self.eigenpair.lam

    @property
    def sigma_min_floor(self) -> Optional[float]:
        values = [smp.sigma_min for smp in self.samples if np.isfinite(smp.sigma_min)]
        return min(values) if values else None

    def lambda_trace(self) -> LambdaTrace:
        return LambdaTrace(
            index=self.index,
            t=np.array([smp.t for smp in self.samples]),
            lam=np.array([smp.lam for smp in self.samples]),
        )


# ---------------------------------------------------------------------------
# tangent / predictor / corrector
# ---------------------------------------------------------------------------

def _sigma_min_safe(lu: Optional[BorderedLU], max_iter: int) -> float:
    if lu is None or max_iter <= 0:
        return float("nan")
    try:
        return min_singular_estimate(lu, max_iter=max_iter)
    except RankDeficiencyError:
        return 0.0


def tangent_at(
    p: HomotopyProblem,
    s: State,
    ori: Optional[int] = None,
    previous: Optional[Tangent] = None,
    sigma_min_iter: int = 0,
) -> Tangent:
    """Unit null vector of [H_x | H_t] with orientation ``ori``.

    The system is bordered with the previous tangent (or e_t at the first
    point), so det [H_x H_t; tangent^T] has the sign of the bordered system.
    Without ``ori`` the tangent points towards increasing t and its determinant
    sign becomes the path orientation.
    """
    N = p.size
    if previous is None:
        border = np.zeros(N + 2)
        border[-1] = 1.0
    else:
        border = previous.vector
    system = augmented_system(p, s, border[:-1], float(border[-1]))
    try:
        lu = factorize(system)
    except RankDeficiencyError as e:
        sigma = _sigma_min_safe(factorize(system, check=False), 5)
        raise PathSingularityError(f"tangent system is rank deficient at t={s.t:.6g}: {e}", sigma_min=sigma) from e
    rhs = np.zeros(N + 2)
    rhs[-1] = 1.0
    y = solve_bordered(lu, rhs)
    tau = y / np.linalg.norm(y)
    sign = lu.det_sign()
    if sign == 0:
        raise PathSingularityError(f"tangent determinant vanishes at t={s.t:.6g}")
    flipped = False
    if ori is None:
        ori = sign
    elif sign != ori:
        tau = -tau
        flipped = True
    sigma_min = _sigma_min_safe(lu, sigma_min_iter)
    if sigma_min_iter > 0 and sigma_min < SIGMA_MIN_WARN_RTOL * lu.scale:
        logger.warning(f"sigma_min estimate {sigma_min:.3e} below regularity floor at t={s.t:.6g}")
    return Tangent(dot_phi=tau[:N], dot_lambda=float(tau[N]), dot_t=float(tau[N + 1]),
                   ori=int(ori), sigma_min=sigma_min, flipped=flipped)


def predict(s: State, tg: Tangent, ds: float) -> Prediction:
    """Euler step of length ``ds``; shortened so that t never passes 1."""
    if ds < 0:
        raise ValueError(f"step size must be nonnegative, got {ds}")
    clamped = False
    t_bar = s.t + ds * tg.dot_t
    if t_bar >= 1.0 and tg.dot_t > 0:
        ds = (1.0 - s.t) / tg.dot_t
        t_bar = 1.0
        clamped = True
    return Prediction(
        phi=s.phi + ds * tg.dot_phi,
        lam=s.lam + ds * tg.dot_lambda,
        t=t_bar,
        ds=ds,
        clamped=clamped,
    )


def correct(
    p: HomotopyProblem,
    predicted: Prediction,
    v_tau: Tuple[np.ndarray, float],
    cfg: TraceConfig,
    damped: bool = False,
) -> CorrectorResult:
    """Newton on [H; v^T (x - x_bar) + tau (t - t_bar)] = 0 from the predicted point.

    With (v, tau) = (0, 1) t stays fixed at the predicted value. ``damped``
    halves each Newton step until the residual decreases.
    """
    v, tau = np.asarray(v_tau[0], dtype=float), float(v_tau[1])
    if not (np.any(v != 0) or tau != 0):
        raise ValueError("hyperplane constraint vector must be nonzero")
    fixed_t = not np.any(v != 0)
    z_bar = predicted.state.as_vector()
    z = z_bar.copy()
    state = State.from_vector(z)
    res = residual_norm(p, state)
    history = [res]
    max_iter = cfg.damped_max_iter if damped else cfg.newton_max_iter
    if res <= cfg.newton_tol:
        return CorrectorResult(True, state, 0, res, history=tuple(history))
    for it in range(1, max_iter + 1):
        F = np.append(eval_H(p, state), v @ (z[:-1] - z_bar[:-1]) + tau * (z[-1] - z_bar[-1]))
        try:
            delta = solve_bordered(augmented_system(p, state, v, tau), -F)
        except RankDeficiencyError as e:
            return CorrectorResult(False, None, it, res, reason=f"singular: {e}", history=tuple(history))
        step = 1.0
        while True:
            trial = z + step * delta
            if fixed_t:
                trial[-1] = z_bar[-1]
            trial_state = State.from_vector(trial)
            trial_res = residual_norm(p, trial_state)
            if not damped or trial_res < res or step < 1.0 / 1024:
                break
            step *= 0.5
        z, state, res = trial, trial_state, trial_res
        history.append(res)
        if not np.isfinite(res):
            return CorrectorResult(False, None, it, res, reason="diverged", history=tuple(history))
        if res <= cfg.newton_tol:
            return CorrectorResult(True, state, it, res, history=tuple(history))
    return CorrectorResult(False, None, max_iter, res, reason="no convergence", history=tuple(history))


# ---------------------------------------------------------------------------
# path tracing
# ---------------------------------------------------------------------------

def _sample(p: HomotopyProblem, s: State, step: int, ds: float, theta: float, sigma_min: Optional[float]) -> PathSample:
    lam_id = lambda_identity(p, s)
    return PathSample(
        step=step,
        t=float(s.t),
        lam=float(s.lam),
        ds=float(ds),
        theta_deg=float(theta),
        sigma_min=float("nan") if sigma_min is None else float(sigma_min),
        residual=residual_norm(p, s),
        norm_gap=abs(float(s.phi @ s.phi) - p.c) / p.c,
        identity_gap=abs(lam_id - s.lam) / max(1.0, abs(s.lam)),
    )


def _finish(p: HomotopyProblem, result: PathResult, state: State, status: str, message: str = "",
            flags: Sequence[str] = ()) -> PathResult:
    result.status = status
    result.last_state = state
    result.message = message
    if state is not None and status in ("converged", "degenerate_endgame"):
        phi = normalize_sign(state.phi)
        result.eigenpair = make_eigenpair(p, phi, state.lam, flags)
    level = logging.INFO if status == "converged" else logging.WARNING
    lam = f"{result.lam:.10g}" if result.lam is not None else "n/a"
    logger.log(level, f"Path {result.index}: {status} - lam={lam}, steps={result.steps}, "
                      f"corrector_rejects={result.corrector_rejects}, angle_rejects={result.angle_rejects}"
                      + (f" ({message})" if message else ""))
    return result


def _chord_angle_deg(s: State, s_new: State, tg: Tangent) -> float:
    """Angle between the tangent at ``s`` and the chord to ``s_new``."""
    chord = s_new.as_vector() - s.as_vector()
    length = float(np.linalg.norm(chord))
    if length == 0.0:
        return 0.0
    cos = float(np.clip(tg.vector @ chord / length, -1.0, 1.0))
    return float(np.degrees(np.arccos(cos)))


def trace_path(p: HomotopyProblem, s0: State, cfg: TraceConfig, index: int = 0) -> PathResult:
    """Follow the path through ``s0`` (at t = 0) up to t = 1."""
    result = PathResult(index=index, status="error", initial_lambda=float(s0.lam))
    res0 = residual_norm(p, s0)
    if res0 > cfg.newton_tol:
        logger.warning(f"Path {index}: start residual {res0:.3e} above newton_tol {cfg.newton_tol:.1e}")
    try:
        tg = tangent_at(p, s0, None, None, cfg.sigma_min_iter)
    except PathSingularityError as e:
        return _finish(p, result, s0, "singular", str(e))
    ori = tg.ori
    state = s0
    ds = cfg.ds0
    endgame_failures = 0
    result.samples.append(_sample(p, s0, 0, 0.0, 0.0, tg.sigma_min))
    if cfg.record_states:
        result.states.append(s0.phi.copy())

    while True:
        if result.steps >= cfg.max_steps:
            return _finish(p, result, state, "max_steps", f"no t = 1 point after {cfg.max_steps} steps")
        pred = predict(state, tg, ds)
        endgame = pred.t >= 1.0
        if endgame:
            v_tau = (np.zeros(p.size + 1), 1.0)
            corr = correct(p, pred, v_tau, cfg)
            if not corr.success:
                corr = correct(p, pred, v_tau, cfg, damped=True)
        else:
            corr = correct(p, pred, (tg.dot_x, tg.dot_t), cfg)
            if corr.success and corr.state.t > 1.0:
                corr = CorrectorResult(False, None, corr.iterations, corr.residual, reason="overshoot past t = 1")

        if not corr.success:
            result.corrector_rejects += 1
            logger.debug(f"Path {index}: corrector rejected at t={pred.t:.6g}, ds={pred.ds:.3e} ({corr.reason})")
            if endgame:
                endgame_failures += 1
                if endgame_failures >= cfg.endgame_max_failures:
                    lam_extra = state.lam + (1.0 - state.t) * tg.dot_lambda / tg.dot_t if tg.dot_t > 0 else state.lam
                    extrapolated = State(state.phi, float(lam_extra), state.t)
                    return _finish(p, result, extrapolated, "degenerate_endgame",
                                   f"endgame failed {endgame_failures} times from t={state.t:.6g}",
                                   flags=("degenerate_endgame",))
            ds = 0.5 * pred.ds
            if ds < cfg.ds_min:
                return _finish(p, result, state, "ds_underflow", f"ds={ds:.3e} below ds_min at t={state.t:.6g}")
            continue

        new_state = corr.state
        if endgame:
            chord_theta = _chord_angle_deg(state, new_state, tg)
            if chord_theta > cfg.angle_halve_deg:
                result.angle_rejects += 1
                logger.debug(f"Path {index}: endgame point off the tangent by {chord_theta:.2f} deg, "
                             f"retrying from t={state.t:.6g}")
                ds = 0.5 * pred.ds
                if ds < cfg.ds_min:
                    return _finish(p, result, state, "ds_underflow", f"ds={ds:.3e} below ds_min at t={state.t:.6g}")
                continue
            result.steps += 1
            result.samples.append(_sample(p, new_state, result.steps, pred.ds, 0.0, tg.sigma_min))
            if cfg.record_states:
                result.states.append(new_state.phi.copy())
            return _finish(p, result, new_state, "converged")

        try:
            new_tg = tangent_at(p, new_state, ori, tg, cfg.sigma_min_iter)
        except PathSingularityError as e:
            return _finish(p, result, state, "singular", f"{e} (sigma_min={e.sigma_min:.3e})")
        theta = tg.angle_deg(new_tg)
        if theta > cfg.angle_halve_deg:
            result.angle_rejects += 1
            logger.debug(f"Path {index}: angle {theta:.2f} deg rejected at t={new_state.t:.6g}")
            ds = 0.5 * pred.ds
            if ds < cfg.ds_min:
                return _finish(p, result, state, "ds_underflow", f"ds={ds:.3e} below ds_min at t={state.t:.6g}")
            continue

        if new_tg.flipped:
            result.orientation_flips += 1
            logger.debug(f"Path {index}: tangent reversed to keep orientation at t={new_state.t:.6g}")
        state, tg = new_state, new_tg
        endgame_failures = 0
        result.steps += 1
        result.samples.append(_sample(p, state, result.steps, pred.ds, theta, tg.sigma_min))
        if cfg.record_states:
            result.states.append(state.phi.copy())
        logger.debug(f"Path {index}: step {result.steps} t={state.t:.6g} lam={state.lam:.8g} "
                     f"ds={pred.ds:.3e} theta={theta:.2f}")
        ds = pred.ds
        if theta < cfg.angle_double_deg:
            ds = min(2.0 * ds, cfg.ds_max)


def _trace_isolated(p: HomotopyProblem, cfg: TraceConfig, index: int, s0: State) -> PathResult:
    try:
        return trace_path(p, s0, cfg, index=index)
    except Exception as e:
        logger.error(f"Path {index} failed: {e}")
        return PathResult(index=index, status="error", initial_lambda=float(s0.lam), last_state=s0, message=str(e))


def trace_all(p: HomotopyProblem, cfg: TraceConfig, which: Sequence[int], workers: int = 1) -> List[PathResult]:
    """Trace the paths starting at the 1-based eigenpairs ``which``; results keep input order."""
    which = [int(k) for k in which]
    starts = initial_states(p, which, tol=cfg.newton_tol)
    jobs = list(zip(which, starts))
    if workers <= 1 or len(jobs) <= 1:
        return [_trace_isolated(p, cfg, k, s0) for k, s0 in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: _trace_isolated(p, cfg, job[0], job[1]), jobs))
