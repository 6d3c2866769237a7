"""
GPE homotopy engine (core/engine.py)

Coordinates the pipeline discretize -> homotopy -> trace -> verify and the
result store. Each public operation returns an ExecutionResult carrying the
command-line exit code.
"""
from typing import Dict, Any, List, Mapping, Optional, Sequence, Tuple
import logging
import time
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from gpehom import __version__
from .config import ConfigError, GpehomSettings, run_config_from_mapping
from .models import CheckSummary, PathSummary, ProblemSpec, RunConfig, RunReport
from .validate import ReportValidator
from gpehom.adapters.base import BaseResultStore, ExecutionResult
from gpehom.adapters.filesystem_store import FilesystemResultStore
from gpehom.numerics.discretize import build_grid
from gpehom.numerics.homotopy import HomotopyProblem, SamplingError, build_problem
from gpehom.numerics.linalg import EigenSolverError
from gpehom.numerics.tracer import PathResult, trace_all
from gpehom.numerics.verify import (
    CheckReport,
    Eigenpair,
    LambdaTrace,
    OracleError,
    antisymmetric_state,
    audit_residuals,
    check_antisymmetric,
    check_bound,
    check_order_preservation,
    check_path_separation,
    check_positive,
    make_eigenpair,
    scf_cross_check,
    scf_ground_state,
)

logger = logging.getLogger("gpehom.engine")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _summary(report: CheckReport) -> CheckSummary:
    return CheckSummary(**report.as_dict())


def run_checks(
    p: HomotopyProblem,
    pairs: Mapping[int, Eigenpair],
    traces: Sequence[LambdaTrace],
    newton_tol: float,
) -> List[CheckReport]:
    """Hard checks (residual, SCF, positivity, antisymmetry, bound), then soft ones."""
    checks: List[CheckReport] = [audit_residuals(p, pairs, newton_tol)]

    if 1 in pairs and p.beta > 0:
        try:
            reference = scf_ground_state(p, tol=10.0 * newton_tol)
            checks.append(scf_cross_check(reference, pairs[1]))
        except OracleError as e:
            checks.append(CheckReport(name="scf_cross_check", passed=False, message=str(e)))
    else:
        checks.append(CheckReport.not_applicable("scf_cross_check", "not applicable: needs path 1 and beta > 0"))

    if 1 in pairs:
        checks.append(check_positive(pairs[1]))
    else:
        checks.append(CheckReport.not_applicable("positivity", "not applicable: path 1 not traced"))

    if p.spec.symmetric_interval and 2 in pairs:
        report = check_antisymmetric(pairs[2], p.grid)
        try:
            reference = antisymmetric_state(p, tol=10.0 * newton_tol)
            phi = pairs[2].phi
            report.details["reference_lambda"] = reference.lam
            report.details["reference_distance"] = float(
                min(np.linalg.norm(reference.phi - phi), np.linalg.norm(reference.phi + phi))
            )
        except OracleError as e:
            report.details["reference_error"] = str(e)
        checks.append(report)
    else:
        checks.append(CheckReport.not_applicable(
            "antisymmetry", "not applicable: needs a 1D symmetric interval and path 2"))

    bounds = [check_bound(tr, p) for tr in traces]
    checks.append(CheckReport(
        name="bound",
        passed=all(b.passed for b in bounds),
        message=f"|lam| <= {p.lambda_bound:.6g} on {sum(b.passed for b in bounds)}/{len(bounds)} paths",
        details={"bound": p.lambda_bound, "max_abs_lambda": {str(b.details["path"]): b.details["max_abs_lambda"]
                                                               for b in bounds}},
    ))
    checks.append(check_order_preservation(traces))
    checks.append(check_path_separation(traces))
    return checks


class GPEHomotopyEngine:
    """Runs, re-verifies and exports homotopy eigenpair computations."""

    def __init__(self, settings: Optional[GpehomSettings] = None, store_factory=FilesystemResultStore):
        self.settings = settings or GpehomSettings.from_env()
        self.store_factory = store_factory
        self.validator = ReportValidator()
        self.logger = logging.getLogger("gpehom.engine")

    # -- problem setup ------------------------------------------------------

    def resolve_config(self, cfg: RunConfig, base_dir: Optional[Path] = None) -> RunConfig:
        """Make file references absolute so the report echo is self-contained."""
        if cfg.potential_file:
            path = Path(cfg.potential_file)
            if not path.is_absolute():
                path = (base_dir or Path.cwd()) / path
            cfg = cfg.model_copy(update={"potential_file": str(path.resolve())})
        return cfg

    def problem_spec(self, cfg: RunConfig) -> ProblemSpec:
        values = None
        if cfg.potential == "tabulated":
            try:
                values = tuple(np.loadtxt(cfg.potential_file, delimiter=",", ndmin=2).ravel())
            except (OSError, ValueError) as e:
                raise ConfigError(f"cannot read potential file {cfg.potential_file}: {e}") from e
        try:
            return cfg.to_problem_spec(potential_values=values)
        except ValidationError as e:
            raise ConfigError(f"invalid problem: {e}") from e

    def build(self, cfg: RunConfig) -> HomotopyProblem:
        spec = self.problem_spec(cfg)
        try:
            return build_problem(spec, cfg.resolved_kind, cfg.seed, cfg.sigma, self.settings.dense_cap)
        except (SamplingError, EigenSolverError) as e:
            raise ConfigError(str(e)) from e
        except ValueError as e:
            raise ConfigError(f"invalid problem: {e}") from e

    # -- solve --------------------------------------------------------------

    def _path_summary(self, p: HomotopyProblem, store: BaseResultStore, result: PathResult) -> PathSummary:
        log_ref = store.write_path_log(result.index, [
            (smp.step, smp.t, smp.lam, smp.ds, smp.theta_deg, smp.sigma_min) for smp in result.samples
        ])
        summary = PathSummary(
            index=result.index,
            status=result.status,
            initial_lambda=result.initial_lambda,
            steps=result.steps,
            corrector_rejects=result.corrector_rejects,
            angle_rejects=result.angle_rejects,
            orientation_flips=result.orientation_flips,
            final_t=None if result.last_state is None else float(result.last_state.t),
            sigma_min_floor=result.sigma_min_floor,
            path_log_file=log_ref,
            message=result.message,
        )
        e = result.eigenpair
        if e is not None:
            flags = list(e.flags)
            if check_positive(e).passed:
                flags.append("positive")
            if p.spec.symmetric_interval and check_antisymmetric(e, p.grid).passed:
                flags.append("antisymmetric")
            summary.lam = e.lam
            summary.residual = e.residual
            summary.flags = list(dict.fromkeys(flags))
            summary.eigenvector_file = store.write_eigenvector(result.index, p.grid.points, e.phi)
        return summary

    def solve(self, cfg: RunConfig, base_dir: Optional[Path] = None, out: Optional[str] = None,
              workers: Optional[int] = None) -> ExecutionResult:
        started = time.perf_counter()
        try:
            cfg = self.resolve_config(cfg, base_dir)
            p = self.build(cfg)
        except ConfigError as e:
            self.logger.error(f"Configuration error: {e}")
            return ExecutionResult(success=False, error=str(e), exit_code=EXIT_CONFIG)
        built = time.perf_counter()

        out_dir = out or cfg.out or self.settings.out_dir
        workers = workers or cfg.workers or self.settings.workers
        try:
            store = self.store_factory(out_dir)
        except OSError as e:
            return ExecutionResult(success=False, error=f"cannot create output directory: {e}", exit_code=EXIT_CONFIG)

        trace_cfg = cfg.to_trace_config()
        try:
            results = trace_all(p, trace_cfg, cfg.path_indices, workers=workers)
        except (ValueError, EigenSolverError) as e:
            self.logger.error(f"Cannot start paths: {e}")
            return ExecutionResult(success=False, error=str(e), exit_code=EXIT_CONFIG)
        traced = time.perf_counter()

        pairs = {r.index: r.eigenpair for r in results if r.success and r.eigenpair is not None}
        traces = [r.lambda_trace() for r in results if r.samples]
        checks = run_checks(p, pairs, traces, trace_cfg.newton_tol)
        checked = time.perf_counter()

        try:
            summaries = [self._path_summary(p, store, r) for r in results]
            report = RunReport(
                version=__version__,
                config=cfg.echo(),
                problem=self._problem_record(p),
                paths=summaries,
                checks=[_summary(c) for c in checks],
                timings={
                    "build": built - started,
                    "trace": traced - built,
                    "checks": checked - traced,
                    "total": time.perf_counter() - started,
                },
            )
            payload = report.model_dump(mode="json")
            self.validator.validate(payload)
            store.write_report(payload)
        except OSError as e:
            return ExecutionResult(success=False, error=f"cannot write results: {e}", exit_code=EXIT_CONFIG)

        converged = sum(r.success for r in results)
        self.logger.info(f"Solved {converged}/{len(results)} paths in {report.timings['total']:.2f}s -> {out_dir}")
        for c in report.hard_failures:
            self.logger.warning(f"Hard check failed: {c.name} ({c.message})")
        exit_code = EXIT_FAILED if report.all_failed else EXIT_OK
        return ExecutionResult(
            success=exit_code == EXIT_OK,
            data=report,
            error="all paths failed" if report.all_failed else None,
            meta={"out_dir": str(out_dir), "results": results, "problem": p},
            exit_code=exit_code,
        )

    @staticmethod
    def _problem_record(p: HomotopyProblem) -> Dict[str, Any]:
        return {
            "dim": p.spec.dim,
            "size": p.size,
            "shape": list(p.grid.shape),
            "h": [float(h) for h in p.grid.h],
            "c": float(p.c),
            "beta": float(p.beta),
            "kind": p.kind.value,
            "sigma": float(p.sigma),
            "seed": int(p.seed),
            "sample_attempt": int(p.attempt),
            "rho_A": float(p.rho_A),
            "rho_D": float(p.rho_D),
            "lambda_bound": float(p.lambda_bound),
        }

    # -- verify / export ----------------------------------------------------

    def _open_report(self, report_path) -> Tuple[BaseResultStore, Dict[str, Any], RunConfig]:
        store = FilesystemResultStore.from_report_path(report_path)
        data = store.read_report()
        self.validator.validate(data)
        cfg = run_config_from_mapping(data["config"])
        return store, data, cfg

    def verify(self, report_path) -> ExecutionResult:
        """Re-run every check from the files of a finished run."""
        try:
            store, data, cfg = self._open_report(report_path)
            p = self.build(cfg)
            pairs: Dict[int, Eigenpair] = {}
            recorded: Dict[int, float] = {}
            traces: List[LambdaTrace] = []
            for entry in data["paths"]:
                index = int(entry["index"])
                if entry.get("path_log_file"):
                    log = store.read_path_log(entry["path_log_file"])
                    if log["t"].size:
                        traces.append(LambdaTrace(index=index, t=log["t"], lam=log["lambda"]))
                if entry["status"] == "converged" and entry.get("eigenvector_file"):
                    _, phi = store.read_eigenvector(entry["eigenvector_file"])
                    if phi.size != p.size:
                        raise ValueError(f"eigenvector of path {index} has {phi.size} entries, expected {p.size}")
                    pairs[index] = make_eigenpair(p, phi, float(entry["lam"]))
                    recorded[index] = float(entry["residual"])
        except (FileNotFoundError, ValueError, OSError) as e:
            self.logger.error(f"Cannot verify {report_path}: {e}")
            return ExecutionResult(success=False, error=str(e), exit_code=EXIT_CONFIG)

        newton_tol = cfg.to_trace_config().newton_tol
        checks = run_checks(p, pairs, traces, newton_tol)
        drift = {k: abs(pairs[k].residual - r) for k, r in recorded.items()}
        worst_drift = max(drift.values()) if drift else 0.0
        checks.append(CheckReport(
            name="residual_replay",
            passed=worst_drift <= 1e-12 * max(1.0, max(recorded.values(), default=0.0)),
            hard=False,
            message=f"max |recomputed - recorded| residual = {worst_drift:.3e}",
            details={"drift": {str(k): v for k, v in drift.items()}},
        ))
        summaries = [_summary(c) for c in checks]
        failures = [c for c in summaries if c.hard and c.applicable and not c.passed]
        for c in summaries:
            level = logging.INFO if c.passed or not c.applicable else logging.WARNING
            self.logger.log(level, f"check {c.name}: {'n/a' if not c.applicable else 'pass' if c.passed else 'FAIL'}"
                                   f" - {c.message}")
        exit_code = EXIT_FAILED if failures else EXIT_OK
        return ExecutionResult(
            success=not failures,
            data=summaries,
            error=f"hard checks failed: {[c.name for c in failures]}" if failures else None,
            meta={"report": str(store.resolve("report.json"))},
            exit_code=exit_code,
        )

    def export(self, report_path, path_index: int) -> ExecutionResult:
        """Plot data with Dirichlet boundary zeros: (x, phi) in 1D, (x, y, phi) row-major in 2D."""
        try:
            store, data, cfg = self._open_report(report_path)
            entry = next((e for e in data["paths"] if int(e["index"]) == int(path_index)), None)
            if entry is None:
                raise IndexError(f"path {path_index} is not in the report "
                                 f"(available: {[e['index'] for e in data['paths']]})")
            if not entry.get("eigenvector_file"):
                raise ValueError(f"path {path_index} has no eigenvector ({entry['status']})")
            grid = build_grid(self.problem_spec(cfg))
            _, phi = store.read_eigenvector(entry["eigenvector_file"])
            if phi.size != grid.size:
                raise ValueError(f"eigenvector has {phi.size} entries, expected {grid.size}")
        except (FileNotFoundError, ValueError, IndexError, OSError) as e:
            self.logger.error(f"Cannot export path {path_index}: {e}")
            return ExecutionResult(success=False, error=str(e), exit_code=EXIT_CONFIG)

        if grid.dim == 1:
            x = np.concatenate([[cfg.x_min], grid.axes[0], [cfg.x_max]])
            values = np.concatenate([[0.0], phi, [0.0]])
            table, columns = np.column_stack([x, values]), ("x", "phi")
        else:
            m, n = grid.shape
            x = np.concatenate([[cfg.x_min], grid.axes[0], [cfg.x_max]])
            y = np.concatenate([[cfg.y_min], grid.axes[1], [cfg.y_max]])
            full = np.zeros((m + 2, n + 2))
            full[1:-1, 1:-1] = phi.reshape(m, n)
            xx, yy = np.meshgrid(x, y, indexing="ij")
            table, columns = np.column_stack([xx.ravel(), yy.ravel(), full.ravel()]), ("x", "y", "phi")
        ref = store.write_export(path_index, table, columns)
        self.logger.info(f"Exported path {path_index}: {store.resolve(ref)}")
        return ExecutionResult(success=True, data=store.resolve(ref), meta={"rows": int(table.shape[0])})
