"""
Filesystem result store

Layout under the run directory:

    report.json                 orjson, sorted keys, 2-space indent
    eigenvectors/path_XXX.csv   x[,y],phi on interior nodes
    logs/path_XXX.csv           step,t,lambda,ds,theta_deg,sigma_min
    export/path_XXX.csv         x[,y],phi including boundary zeros

CSV values use %.16e so re-reading reproduces the stored doubles exactly.
"""
from __future__ import annotations
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence, Tuple, Union

import numpy as np
import orjson

from .base import (
    BaseResultStore,
    EIGENVECTOR_COLUMNS_1D,
    EIGENVECTOR_COLUMNS_2D,
    PATH_LOG_COLUMNS,
)

logger = logging.getLogger("gpehom.store")

REPORT_NAME = "report.json"
FLOAT_FMT = "%.16e"
JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY


def _path_name(index: int) -> str:
    return f"path_{int(index):03d}.csv"


class FilesystemResultStore(BaseResultStore):
    """Run artifacts as plain files under ``root``."""

    def __init__(self, root: Union[str, Path], create: bool = True):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        elif not self.root.is_dir():
            raise FileNotFoundError(f"run directory not found: {self.root}")

    @classmethod
    def from_report_path(cls, report_path: Union[str, Path]) -> "FilesystemResultStore":
        """Store for the directory of an existing report (file or directory path)."""
        path = Path(report_path)
        if path.is_dir():
            path = path / REPORT_NAME
        if not path.is_file():
            raise FileNotFoundError(f"report not found: {path}")
        return cls(path.parent, create=False)

    def resolve(self, ref: str) -> Path:
        return self.root / ref

    # -- report -------------------------------------------------------------

    def write_report(self, report: Mapping[str, Any]) -> str:
        path = self.root / REPORT_NAME
        path.write_bytes(orjson.dumps(dict(report), option=JSON_OPTIONS) + b"\n")
        logger.info(f"Report written: {path}")
        return REPORT_NAME

    def read_report(self) -> Dict[str, Any]:
        path = self.root / REPORT_NAME
        if not path.is_file():
            raise FileNotFoundError(f"report not found: {path}")
        try:
            data = orjson.loads(path.read_bytes())
        except orjson.JSONDecodeError as e:
            raise ValueError(f"corrupt report {path}: {e}") from e
        if not isinstance(data, dict):
            raise ValueError(f"corrupt report {path}: top level is not an object")
        return data

    # -- CSV helpers --------------------------------------------------------

    def _write_csv(self, ref: str, table: np.ndarray, columns: Sequence[str], fmt=FLOAT_FMT) -> str:
        path = self.root / ref
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, table, fmt=fmt, delimiter=",", header=",".join(columns), comments="")
        return ref

    def _read_csv(self, ref: str) -> Tuple[Tuple[str, ...], np.ndarray]:
        path = self.root / ref
        if not path.is_file():
            raise FileNotFoundError(f"data file not found: {path}")
        try:
            with path.open("r", encoding="utf-8") as fh:
                header = tuple(h.strip() for h in fh.readline().strip().split(","))
                table = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as e:
            raise ValueError(f"corrupt data file {path}: {e}") from e
        if table.size and table.shape[1] != len(header):
            raise ValueError(f"corrupt data file {path}: {table.shape[1]} columns, header names {len(header)}")
        return header, table

    # -- eigenvectors -------------------------------------------------------

    def write_eigenvector(self, index: int, points: np.ndarray, phi: np.ndarray) -> str:
        points = np.asarray(points, dtype=float)
        columns = EIGENVECTOR_COLUMNS_1D if points.shape[1] == 1 else EIGENVECTOR_COLUMNS_2D
        table = np.column_stack([points, np.asarray(phi, dtype=float)])
        return self._write_csv(f"eigenvectors/{_path_name(index)}", table, columns)

    def read_eigenvector(self, ref: str) -> Tuple[np.ndarray, np.ndarray]:
        header, table = self._read_csv(ref)
        if header not in (EIGENVECTOR_COLUMNS_1D, EIGENVECTOR_COLUMNS_2D):
            raise ValueError(f"unexpected eigenvector columns {header} in {ref}")
        return table[:, :-1], table[:, -1]

    # -- path logs ----------------------------------------------------------

    def write_path_log(self, index: int, rows: Sequence[Sequence[float]]) -> str:
        table = np.asarray(rows, dtype=float).reshape(-1, len(PATH_LOG_COLUMNS))
        fmt = ["%d"] + [FLOAT_FMT] * (len(PATH_LOG_COLUMNS) - 1)
        return self._write_csv(f"logs/{_path_name(index)}", table, PATH_LOG_COLUMNS, fmt=fmt)

    def read_path_log(self, ref: str) -> Dict[str, np.ndarray]:
        header, table = self._read_csv(ref)
        if header != PATH_LOG_COLUMNS:
            raise ValueError(f"unexpected path-log columns {header} in {ref}")
        return {name: table[:, k] for k, name in enumerate(header)}

    # -- exports ------------------------------------------------------------

    def write_export(self, index: int, table: np.ndarray, columns: Sequence[str]) -> str:
        return self._write_csv(f"export/{_path_name(index)}", np.asarray(table, dtype=float), columns)
