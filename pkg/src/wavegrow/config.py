"""Run configuration: flat ``section.key = value`` text files.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Every problem in a file is collected and reported together as
:class:`~wavegrow.errors.ConfigError`, keyed by its dotted path.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass

from .errors import ConfigError
from .integrator import IntegratorConfig, default_dt
from .potential import PotentialSpec
from .presets import PRESETS
from .propagator import StepRule
from .spectral import GridSpec

__all__ = ["SCHEMA", "RunConfig", "parse_config", "parse_config_text", "emit_config"]

_REQ = object()

# key: (type, default); _REQ marks required keys, None means "unset"
SCHEMA = {
    "grid.dim": ("int", _REQ),
    "grid.n": ("int", _REQ),
    "grid.L": ("float", _REQ),
    "potential.amplitude": ("float", 1.0),
    "potential.radius": ("float", 1.0),
    "potential.omega": ("float", 0.0),
    "potential.enabled": ("bool", True),
    "integrator.dt": ("float", None),
    "integrator.cubic_enabled": ("bool", True),
    "step_rule.c": ("float", 0.5),
    "step_rule.gamma": ("float", 2.0),
    "data.preset": ("str", "gaussian-bump"),
    "data.amplitude": ("float", 1.0),
    "data.width": ("float", 1.0),
    "data.velocity": ("float", 0.0),
    "data.m": ("int", 1),
    "data.decay": ("float", 4.0),
    "data.path": ("str", None),
    "data.velocity_path": ("str", None),
    "experiment.horizon": ("float", 10.0),
    "experiment.sample_every": ("int", 100),
    "experiment.k_list": ("ints", (1, 2)),
    "experiment.checkpoint_every": ("int", 10),
    "experiment.identities": ("bool", False),
    "dichotomy.amplitudes": ("floats", (0.0, 0.5, 1.0, 2.0, 4.0)),
    "dichotomy.omegas": ("floats", (0.5, 1.0, 2.0, 3.0, 4.0)),
    "dichotomy.workers": ("int", 1),
    "pipeline.steps_per_window": ("int", 20),
    "stability.deltas": ("floats", (1e-3, 5e-4, 2.5e-4, 1.25e-4)),
    "stability.horizon": ("float", None),
    "fit.input": ("str", None),
    "fit.column": ("str", "H1"),
    "fit.t0": ("float", None),
    "fit.t1": ("float", None),
    "identity.window": ("float", 0.1),
    "identity.alpha": ("ints", None),
    "output.dir": ("str", "run"),
    "seed": ("int", 0),
}

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
# grid size caps keep a mistyped config from allocating the whole machine
_MAX_POINTS = {1: 1 << 20, 2: 1 << 12, 3: 1 << 9}


def _parse_scalar(kind, text):
    if kind == "int":
        v = int(text, 10)
        return v
    if kind == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "bool":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind == "str":
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
            text = text[1:-1]
        return text
    raise AssertionError(kind)


def _parse_value(kind, text):
    if kind in ("ints", "floats"):
        parts = [p.strip() for p in text.strip("[]()").split(",")]
        parts = [p for p in parts if p]
        if not parts:
            raise ValueError("expected a non-empty comma-separated list")
        return tuple(_parse_scalar(kind[:-1], p) for p in parts)
    return _parse_scalar(kind, text)


def _fmt_value(kind, v):
    if kind in ("ints", "floats"):
        return ", ".join(_fmt_value(kind[:-1], x) for x in v)
    if kind == "float":
        return repr(float(v))
    if kind == "bool":
        return "true" if v else "false"
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``values`` maps every schema key to its value."""

    values: dict
    base_dir: str = "."

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    @property
    def grid(self):
        v = self.values
        return GridSpec(v["grid.dim"], v["grid.n"], v["grid.L"])

    @property
    def potential(self):
        v = self.values
        return PotentialSpec(v["potential.amplitude"], v["potential.radius"], v["potential.omega"],
                             v["potential.enabled"])

    @property
    def step_rule(self):
        return StepRule(self.values["step_rule.c"], self.values["step_rule.gamma"])

    @property
    def integrator(self):
        dt = self.values["integrator.dt"]
        if dt is None:
            dt = default_dt(self.grid)
        return IntegratorConfig(dt, self.values["integrator.cubic_enabled"])

    @property
    def k_list(self):
        return tuple(self.values["experiment.k_list"])

    @property
    def seed(self):
        return self.values["seed"]

    def data_params(self):
        out = {k.split(".", 1)[1]: v for k, v in self.values.items()
               if k.startswith("data.") and k != "data.preset" and v is not None}
        for key in ("path", "velocity_path"):
            if key in out:
                out[key] = self.resolve(out[key])
        return out

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def with_overrides(self, **flat):
        vals = dict(self.values)
        vals.update({k.replace("__", "."): v for k, v in flat.items()})
        return _validate(vals, self.base_dir, [])


def _validate(vals, base_dir, errors):
    def err(key, msg):
        errors.append((key, msg))

    dim, n, L = vals.get("grid.dim"), vals.get("grid.n"), vals.get("grid.L")
    if dim is not None and dim not in (1, 2, 3):
        err("grid.dim", f"must be 1, 2 or 3, got {dim}")
    if n is not None:
        if n < 8 or n & (n - 1):
            err("grid.n", f"must be a power of two >= 8, got {n}")
        elif dim in _MAX_POINTS and n > _MAX_POINTS[dim]:
            err("grid.n", f"exceeds the cap {_MAX_POINTS[dim]} for dim={dim}")
    if L is not None and not L > 0:
        err("grid.L", f"must be positive, got {L}")
    amp, rho, om = vals.get("potential.amplitude"), vals.get("potential.radius"), vals.get("potential.omega")
    if amp is not None and amp < 0:
        err("potential.amplitude", f"must be >= 0, got {amp}")
    if om is not None and om < 0:
        err("potential.omega", f"must be >= 0, got {om}")
    if rho is not None:
        if not rho > 0:
            err("potential.radius", f"must be positive, got {rho}")
        elif L is not None and L > 0 and rho >= L:
            err("potential.radius, grid.L", f"support radius {rho} must be smaller than the half width {L}")
    dt = vals.get("integrator.dt")
    if dt is not None:
        if not dt > 0:
            err("integrator.dt", f"must be positive, got {dt}")
        elif n and L and L > 0 and n >= 8 and not (n & (n - 1)) and dt > 0.5 * (2 * L / n) * (1 + 1e-12):
            err("integrator.dt", f"{dt} exceeds half the grid spacing {L / n}")
    c, gamma = vals.get("step_rule.c"), vals.get("step_rule.gamma")
    if c is not None and not 0 < c <= 1:
        err("step_rule.c", f"must lie in (0, 1], got {c}")
    if gamma is not None and not gamma > 0:
        err("step_rule.gamma", f"must be positive, got {gamma}")
    preset = vals.get("data.preset")
    if preset is not None and preset not in PRESETS:
        err("data.preset", f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")
    if preset == "from-file":
        for key in ("data.path", "data.velocity_path"):
            p = vals.get(key)
            if p is None:
                if key == "data.path":
                    err(key, "required by preset 'from-file'")
                continue
            full = p if os.path.isabs(p) else os.path.join(base_dir, p)
            if not os.path.isfile(full):
                err(key, f"file not found: {full}")
    for key in ("data.width", "data.decay"):
        v = vals.get(key)
        if v is not None and not v > 0:
            err(key, f"must be positive, got {v}")
    h = vals.get("experiment.horizon")
    if h is not None and not h > 0:
        err("experiment.horizon", f"must be positive, got {h}")
    for key in ("experiment.sample_every", "experiment.checkpoint_every", "pipeline.steps_per_window",
                "dichotomy.workers"):
        v = vals.get(key)
        if v is not None and v < 1:
            err(key, f"must be >= 1, got {v}")
    ks = vals.get("experiment.k_list")
    if ks is not None and any(k < 1 for k in ks):
        err("experiment.k_list", f"every k must be >= 1, got {list(ks)}")
    ds = vals.get("stability.deltas")
    if ds is not None and any(d < 0 for d in ds):
        err("stability.deltas", "perturbation sizes must be >= 0")
    for key in ("stability.horizon", "identity.window"):
        v = vals.get(key)
        if v is not None and not v > 0:
            err(key, f"must be positive, got {v}")
    alpha = vals.get("identity.alpha")
    if alpha is not None:
        if any(a < 0 for a in alpha):
            err("identity.alpha", "multi-index entries must be >= 0")
        elif dim in (1, 2, 3) and len(alpha) != dim:
            err("identity.alpha", f"needs {dim} entries for dim={dim}, got {len(alpha)}")
    seed = vals.get("seed")
    if seed is not None and not 0 <= seed < 2**64:
        err("seed", "must be an unsigned 64-bit integer")
    if errors:
        raise ConfigError(errors)
    return RunConfig(dict(vals), base_dir)


def parse_config_text(text, base_dir="."):
    """Parse and validate config text; raise :class:`ConfigError` listing every problem."""
    errors = []
    vals = {}
    seen = set()
    try:
        lines = str(text).splitlines()
    except Exception as exc:  # pragma: no cover - str() of arbitrary objects
        raise ConfigError([("<file>", f"unreadable: {exc}")]) from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append((f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}"))
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not _KEY_RE.match(key):
            errors.append((f"line {lineno}", f"malformed key {key!r}"))
            continue
        if key not in SCHEMA:
            errors.append((key, "unknown key"))
            continue
        if key in seen:
            errors.append((key, f"duplicate assignment on line {lineno}"))
            continue
        seen.add(key)
        kind, _ = SCHEMA[key]
        try:
            vals[key] = _parse_value(kind, value)
        except (ValueError, OverflowError) as exc:
            errors.append((key, f"expected {kind}: {exc}"))
    for key, (kind, default) in SCHEMA.items():
        if key in vals or any(k == key for k, _ in errors):
            continue
        if default is _REQ:
            errors.append((key, "missing required key"))
        else:
            vals[key] = default
    return _validate(vals, base_dir, errors)


def parse_config(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError([("<file>", f"cannot read {path}: {exc}")]) from exc
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError([("<file>", f"not valid UTF-8: {exc}")]) from exc
    return parse_config_text(text, base_dir=os.path.dirname(os.path.abspath(path)))


def emit_config(cfg):
    """Canonical text form; ``parse_config_text(emit_config(c)) == c``."""
    lines = []
    section = None
    for key, (kind, _) in SCHEMA.items():
        v = cfg.values.get(key)
        if v is None:
            continue
        sec = key.split(".", 1)[0] if "." in key else ""
        if sec != section:
            if lines:
                lines.append("")
            if sec:
                lines.append(f"# {sec}")
            section = sec
        lines.append(f"{key} = {_fmt_value(kind, v)}")
    return "\n".join(lines) + "\n"
