"""Flat ``key = value`` configuration files.

Lines are ``section.key = value``; ``#`` starts a comment.  Values are parsed
as int, float, bool, comma-separated lists, or left as strings.  Unknown
keys are rejected.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "DEFAULTS", "Config", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


TWO_PI = 2 * math.pi

DEFAULTS: dict = {
    # base (desk) grid
    "grid.n": 2,
    "grid.L": TWO_PI,
    "grid.N_tan": 128,
    "grid.H": TWO_PI,
    "grid.N_nor": 96,
    # time sampling
    "time.t0": 1e-3,
    "time.ratio": 2 ** 0.25,
    "time.count": 48,
    # scenario library
    "scenario.family": "dipole",
    "scenario.amplitude": 1.0,
    "scenario.seed": 0,
    "scenario.j": 2,
    # forced problems and iteration run on a taller, coarser box
    "forced.N_tan": 32,
    "forced.N_nor": 96,
    "forced.H": 2 * TWO_PI,
    "forced.count": 24,
    "forced.ratio": 2 ** 0.5,
    "forced.t0": 1e-3,
    "stokes.nodes": 8,
    "stokes.ratio": 0.7,
    "theorem.alpha": 0.5,
    "theorem.p": 4.0,
    "theorem.p1": 2.0,
    "theorem.weight": 0.5,
    "theorem.besov_alphas": [0.3, 0.7],
    "theorem.besov_p1": 1.5,
    "theorem.besov_weight": 1 / 12,
    "theorem.samples": 3,
    "picard.N_tan": 32,
    "picard.N_nor": 64,
    "picard.H": 2 * TWO_PI,
    "picard.t0": 1e-3,
    "picard.ratio": 2 ** 0.5,
    "picard.count": 13,
    "picard.p0": 4.0,
    "picard.p": 1.5,
    "picard.m_max": 12,
    "picard.stop_tol": 1e-7,
    "picard.target_ratio": 0.08,
    "picard.stress": 50.0,
    "helmholtz.samples": 20,
    "product.samples": 8,
    "product.beta": 0.5,
    "oracle.samples": 5,
    # tolerances
    "tol.semigroup": 1e-8,
    "tol.mass": 1e-10,
    "tol.odd_trace": 1e-10,
    "tol.band_spread": 0.15,
    "tol.slope": 0.05,
    "tol.stability": 0.20,
    "tol.theorem_stability": 0.25,
    "tol.stokes_contract": 1e-6,
    "tol.order": 1.5,
    "tol.projection_order": 2.0,
    "tol.roundoff_floor": 1e-12,
    "tol.oracle": 1e-6,
    "tol.picard_iterations": 12,
    # run selection
    "run.checks": ["kernels", "heat_decay", "multiplier", "helmholtz", "stokes",
                   "theorem", "product", "picard", "uniqueness", "oracle"],
    "run.seed": 0,
    "run.threads": 1,
    "run.level": 1,
}


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg}


def _arith(text: str) -> float:
    """Evaluate a number or simple arithmetic such as ``2*pi`` or ``2**0.25``."""
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(text)
    return float(ev(ast.parse(text, mode="eval").body))


def _parse_value(text: str, default):
    text = text.strip()
    if isinstance(default, list):
        if not text:
            return []
        inner = default[0] if default else ""
        return [_parse_value(x, inner) for x in text.split(",")]
    if isinstance(default, bool):
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"expected an integer, got {text!r}") from None
    if isinstance(default, float):
        try:
            return _arith(text)
        except Exception:
            raise ConfigError(f"expected a number, got {text!r}") from None
    return text


@dataclass
class Config:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))
    source: str | None = None

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def section(self, prefix: str) -> dict:
        p = prefix + "."
        return {k[len(p):]: v for k, v in self.values.items() if k.startswith(p)}

    def override(self, **kv) -> "Config":
        vals = dict(self.values)
        for k, v in kv.items():
            key = k.replace("__", ".")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            vals[key] = v
        return Config(vals, self.source)


def parse_config(text: str, source: str | None = None) -> Config:
    values = dict(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        try:
            values[key] = _parse_value(val, DEFAULTS[key])
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return Config(values, source)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
