"""Experiment configuration, result tables and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCHEMA_ID = "hlimit-report/1"

EXPERIMENTS = ("verify", "means1d", "homog1d", "hlimit3d", "bcgap", "conv", "maxwell", "divcurl")

# per-experiment defaults; ``tol`` is the verdict threshold of the headline quantity
DEFAULTS = {
    "verify": {"grid": (8,), "tol": 1e-10},
    "means1d": {"grid": (1024,), "tol": 0.05},
    "homog1d": {"grid": (1024,), "tol": 0.02},
    "hlimit3d": {"grid": (6, 6, 6), "tol": 0.05},
    "bcgap": {"grid": (6, 6, 6), "tol": 0.02},
    "conv": {"grid": (1024,), "tol": 0.05},
    "maxwell": {"grid": (4, 4, 4), "tol": 0.05},
    "divcurl": {"grid": (1024,), "tol": 0.05},
}


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to the usage exit code)."""


@dataclass
class ExperimentConfig:
    experiment: str
    grid: tuple[int, ...] | None = None
    n_max: int = 64
    probe_k: int = 5
    tol: float | None = None
    out: str = "-"
    format: str = "csv"
    seed: int = 0
    indices: tuple[int, ...] | None = None
    lambdas: tuple[float, ...] = (1.0, 2.0, 4.0)

    def validate(self) -> "ExperimentConfig":
        """Check fields and fill experiment defaults; returns ``self``."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        d = DEFAULTS[self.experiment]
        if self.grid is None:
            self.grid = tuple(d["grid"])
        self.grid = tuple(int(g) for g in self.grid)
        if self.tol is None:
            self.tol = float(d["tol"])
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if any(g < 2 for g in self.grid):
            raise ConfigError("grid sizes must be at least 2")
        if self.experiment in ("means1d", "homog1d", "conv", "divcurl") and len(self.grid) != 1:
            raise ConfigError(f"{self.experiment} needs a single grid size")
        if self.experiment in ("hlimit3d", "bcgap", "maxwell"):
            if len(self.grid) == 1:
                self.grid = self.grid * 3
            if len(self.grid) != 3:
                raise ConfigError(f"{self.experiment} needs three grid sizes")
        if self.n_max < 4 or self.n_max & (self.n_max - 1):
            raise ConfigError("n_max must be a power of two, at least 4")
        if self.probe_k < 1:
            raise ConfigError("probe_k must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.indices is not None:
            self.indices = tuple(int(n) for n in self.indices)
            if len(self.indices) < 3 or any(n < 1 for n in self.indices) or \
                    list(self.indices) != sorted(set(self.indices)):
                raise ConfigError("indices must be at least three increasing positive integers")
        self.lambdas = tuple(float(x) for x in self.lambdas)
        if not self.lambdas or any(x <= 0 for x in self.lambdas):
            raise ConfigError("lambdas must be positive")
        return self

    def dyadic_indices(self) -> tuple[int, ...]:
        if self.indices is not None:
            return self.indices
        out, n = [], 1
        while n <= self.n_max:
            out.append(n)
            n *= 2
        return tuple(out)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("grid", "indices", "lambdas"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


def load_config(path) -> dict:
    """Read a JSON config file into a plain dict of ExperimentConfig fields."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


@dataclass
class ReportRow:
    n: int | None
    quantity: str
    value: float | None
    reference: float | None
    error: float | None


@dataclass
class ReportTable:
    rows: list = field(default_factory=list)
    verdict: bool = True
    converged: bool = True
    checks: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def add(self, n, quantity: str, value, reference=None, error=None) -> None:
        conv = lambda x: None if x is None else float(x)  # noqa: E731
        self.rows.append(ReportRow(None if n is None else int(n), quantity, conv(value),
                                   conv(reference), conv(error)))

    def check(self, name: str, ok: bool) -> bool:
        """Record a named pass/fail criterion and fold it into the verdict."""
        self.checks[name] = bool(ok)
        self.verdict = self.verdict and bool(ok)
        return bool(ok)

    def exit_code(self) -> int:
        if not self.converged:
            return 3
        return 0 if self.verdict else 1

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_ID, "config": self.config, "seed": self.config.get("seed"),
                "verdict": self.verdict, "converged": self.converged,
                "checks": dict(sorted(self.checks.items())),
                "rows": [asdict(r) for r in self.rows]}


COLUMNS = ("n", "quantity", "value", "reference", "error")


def _cell(x) -> str:
    if x is None:
        return ""
    return repr(x) if isinstance(x, float) else str(x)


def render(report: ReportTable, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in report.rows:
            w.writerow([_cell(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    raise ConfigError(f"unknown format {fmt!r}")


def emit(report: ReportTable, fmt: str, path) -> None:
    """Write the table as CSV or JSON to ``path`` (``-`` for stdout)."""
    text = render(report, fmt)
    if str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")


def read_json_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
