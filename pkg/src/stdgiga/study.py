"""Convergence studies over degrees and refinement levels, with CSV/JSON output."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .assembly import DGParameters, assemble_system, default_penalties
from .cases import CASES, get_case, sine_problem
from .errors import convergence_rates, dg_error, l2_error
from .exceptions import ConfigError, SolverError
from .geometry import domain_from_geometries, load_geometry
from .solve import solve

__all__ = ["StudyConfig", "StudyRow", "run_study", "write_output", "read_output", "format_table", "COLUMNS"]

log = logging.getLogger(__name__)

COLUMNS = ("case", "degree", "level", "dofs", "h", "err_dg", "rate_dg", "err_l2", "rate_l2")
DEGREES = (1, 2, 3, 4)


@dataclass(frozen=True)
class StudyConfig:
    case: str = "moving-2d"
    degrees: tuple = (2,)
    levels: int = 4
    theta: float = 0.1
    delta1: float | None = None
    delta2: float | None = None
    quad: int | None = None
    geometry: str | None = None
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(p) for p in self.degrees))
        if not self.degrees or any(p not in DEGREES for p in self.degrees):
            raise ConfigError(f"degrees must be a non-empty subset of {DEGREES}, got {self.degrees}")
        if int(self.levels) < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        if not self.theta > 0:
            raise ConfigError("theta must be positive")
        for name in ("delta1", "delta2"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name} must be positive")
        if self.quad is not None and not 1 <= int(self.quad) <= 15:
            raise ConfigError("quad must lie in [1, 15]")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")
        if self.geometry is None and self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}; choose from {sorted(CASES)}")

    def parameters(self, p: int, d: int) -> DGParameters:
        d1, d2 = default_penalties(p, d)
        d1 = d1 if self.delta1 is None else float(self.delta1)
        d2 = d2 if self.delta2 is None else float(self.delta2)
        quad = None if self.quad is None else (int(self.quad),) * (d + 1)
        return DGParameters(float(self.theta), d1, d2, quad)


@dataclass
class StudyRow:
    case: str
    degree: int
    level: int
    dofs: int
    h: float
    err_dg: float
    rate_dg: float | None = None
    err_l2: float = field(default=0.0)
    rate_l2: float | None = None


def _load(cfg: StudyConfig):
    if cfg.geometry is not None:
        domain = domain_from_geometries(load_geometry(cfg.geometry))
        return Path(cfg.geometry).stem, domain, sine_problem(domain.spatial_dim)
    domain, problem = get_case(cfg.case)
    return cfg.case, domain, problem


def expected_dofs(domain, constrained: int) -> int:
    """``sum_patches prod_a n_a`` minus the constrained count."""
    return int(sum(np.prod(pt.space.shape) for pt in domain.patches)) - constrained


def run_study(cfg: StudyConfig) -> list:
    """Solve on levels ``1..cfg.levels`` for each degree and tabulate errors and rates."""
    name, base, problem = _load(cfg)
    rows = []
    for p in cfg.degrees:
        params = cfg.parameters(p, base.spatial_dim)
        block = []
        for level in range(1, cfg.levels + 1):
            domain = base.discretize(p, level)
            system = assemble_system(domain, problem, params)
            if system.size != expected_dofs(domain, system.constrained.size):
                raise RuntimeError("dof bookkeeping mismatch")
            try:
                report = solve(system)
            except SolverError as exc:
                raise SolverError(f"degree {p}, level {level}: {exc}") from exc
            coeffs = system.expand(report.solution)
            h = max(pt.h for pt in domain.patches)
            row = StudyRow(
                name, p, level, system.size, float(h),
                dg_error(coeffs, problem, domain, params),
                err_l2=l2_error(coeffs, problem, domain, params),
            )
            log.info("p=%d level=%d dofs=%d err_dg=%.4e err_l2=%.4e residual=%.1e",
                     p, level, row.dofs, row.err_dg, row.err_l2, report.relative_residual)
            block.append(row)
        _fill_rates(block)
        rows.extend(block)
    return rows


def _fill_rates(block):
    for key in ("dg", "l2"):
        errs = [getattr(r, f"err_{key}") for r in block]
        if len(errs) < 2 or min(errs) <= 0:
            continue
        for r, rate in zip(block[1:], convergence_rates(errs)):
            setattr(r, f"rate_{key}", rate)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) or isinstance(v, str):
        return str(v)
    return f"{float(v):.12g}"


def _record(row: StudyRow) -> dict:
    return {k: _fmt(v) for k, v in asdict(row).items()}


def format_table(rows, fmt: str = "csv") -> str:
    if not rows:
        raise ValueError("empty table")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(_record(r))
        return buf.getvalue()
    if fmt == "json":
        recs = []
        for r in rows:
            rec = asdict(r)
            # round through the printed precision so files alone reproduce rates
            for k, v in rec.items():
                if isinstance(v, float):
                    rec[k] = float(_fmt(v))
            recs.append(rec)
        return json.dumps({"columns": list(COLUMNS), "rows": recs}, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def write_output(rows, path, fmt: str = "csv") -> Path:
    path = Path(path)
    path.write_text(format_table(rows, fmt))
    return path


def _parse(v, kind):
    if v is None or v == "":
        return None
    return kind(v)


def read_output(path, fmt: str | None = None) -> list:
    """Read a table written by ``write_output``."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    text = path.read_text()
    if fmt == "json":
        recs = json.loads(text)["rows"]
    else:
        recs = list(csv.DictReader(io.StringIO(text)))
    kinds = {"case": str, "degree": int, "level": int, "dofs": int}
    rows = []
    for rec in recs:
        vals = {k: _parse(rec[k], kinds.get(k, float)) for k in COLUMNS}
        rows.append(StudyRow(**vals))
    return rows
