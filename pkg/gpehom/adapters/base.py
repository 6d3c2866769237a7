# gpehom/adapters/base.py
"""
Result store base module

Defines the interface for persisting run artifacts (report, eigenvectors, path
logs, plot exports) and the result type returned by engine operations.
"""
from __future__ import annotations
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

EIGENVECTOR_COLUMNS_1D = ("x", "phi")
EIGENVECTOR_COLUMNS_2D = ("x", "y", "phi")
PATH_LOG_COLUMNS = ("step", "t", "lambda", "ds", "theta_deg", "sigma_min")


@dataclass
class ExecutionResult:
    """
    Outcome of an engine operation.

    ``exit_code`` follows the command-line contract: 0 ok (possibly with
    flagged path failures), 1 all paths failed or a hard check failed,
    2 configuration or I/O error.
    """
    success: bool
    data: Optional[Any] = None
    error: Optional[str] = None
    meta: Optional[Dict[str, Any]] = None
    exit_code: int = 0

    def __bool__(self) -> bool:
        return self.success


class BaseResultStore(ABC):
    """
    Storage for one run directory.

    File references handed out by a store are relative to its root so a run
    directory can be moved as a whole.
    """

    @abstractmethod
    def write_report(self, report: Mapping[str, Any]) -> str:
        """Persist the report; returns its reference."""

    @abstractmethod
    def read_report(self) -> Dict[str, Any]:
        """Load the report. Raises FileNotFoundError or ValueError."""

    @abstractmethod
    def write_eigenvector(self, index: int, points: np.ndarray, phi: np.ndarray) -> str:
        """Interior-node coordinates (N, dim) and values; returns a reference."""

    @abstractmethod
    def read_eigenvector(self, ref: str) -> Tuple[np.ndarray, np.ndarray]:
        """Inverse of ``write_eigenvector``: (points, phi)."""

    @abstractmethod
    def write_path_log(self, index: int, rows: Sequence[Sequence[float]]) -> str:
        """Rows with the PATH_LOG_COLUMNS; returns a reference."""

    @abstractmethod
    def read_path_log(self, ref: str) -> Dict[str, np.ndarray]:
        """Column name -> values."""

    @abstractmethod
    def write_export(self, index: int, table: np.ndarray, columns: Sequence[str]) -> str:
        """Plot-ready table; returns a reference."""

    def resolve(self, ref: str) -> Any:
        """Backend location of ``ref``; stores without one return it unchanged."""
        return ref

    def close(self) -> None:
        """Release resources; the filesystem store holds none."""
        pass
