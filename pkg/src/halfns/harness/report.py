"""Verification report assembly and the suite driver."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .checks import CHECKS, CheckResult, run_check
from .config import Config, load_config

__all__ = ["CSV_COLUMNS", "VerificationReport", "run_verification_suite", "read_report"]

CSV_COLUMNS = ["check", "anchor", "measured", "constant", "level", "pass"]


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return x.item()
    return x


@dataclass
class VerificationReport:
    scenario: dict
    results: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failing(self) -> list[str]:
        return [r.name for r in self.results if not r.passed]

    def rows(self) -> list[dict]:
        out = []
        for r in self.results:
            if r.error is not None:
                out.append({"check": r.name, "anchor": r.anchor, "measured": "nan",
                            "constant": "", "level": "", "pass": False})
            for row in r.rows:
                out.append({"check": f"{r.name}/{row.metric}", "anchor": r.anchor,
                            "measured": repr(row.measured),
                            "constant": "" if row.constant is None else repr(row.constant),
                            "level": row.level, "pass": row.passed})
        return out

    def as_dict(self) -> dict:
        return _jsonable({"scenario": self.scenario, "passed": self.passed,
                          "failing": self.failing(),
                          "checks": [r.as_dict() for r in self.results]})

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / "report.csv", out / "report.json"
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            w.writerows(self.rows())
        self.paths = {"csv": str(csv_path), "json": str(json_path)}
        payload = dict(self.as_dict(), paths=self.paths)
        json_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        return self.paths

    def summary_lines(self) -> list[str]:
        lines = []
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            extra = f" ({r.error})" if r.error else ""
            lines.append(f"{status} {r.name:<11} {r.runtime:7.1f}s  {r.anchor}{extra}")
        return lines


def _run_one(args) -> CheckResult:
    name, values = args
    return run_check(name, Config(values))


def run_verification_suite(config, out_dir=None, threads: int | None = None) -> VerificationReport:
    """Run every check listed under ``run.checks``; write report.csv and
    report.json to ``out_dir`` when given.  ``config`` is a path or a Config."""
    cfg = config if isinstance(config, Config) else load_config(config)
    names = list(cfg["run.checks"])
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        from .config import ConfigError
        raise ConfigError(f"unknown checks in run.checks: {unknown}")
    threads = threads or cfg["run.threads"]
    jobs = [(n, dict(cfg.values)) for n in names]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    scenario = {k: v for k, v in cfg.values.items() if not k.startswith("tol.")}
    report = VerificationReport(scenario, results)
    if out_dir is not None:
        report.write(out_dir)
    return report


def read_report(path) -> dict:
    """Load report.json from a directory or a direct path."""
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    return json.loads(p.read_text())
