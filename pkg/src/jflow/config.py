"""Typed INI run configuration with line-numbered diagnostics.

Schema (every key optional; defaults in brackets)::

    [scenario]   name [strict], N, n, m, seed [0]
    [flow]       method [rk4], dt0, t_max [10], tol_converge [1e-8],
                 record_interval [0.1], mask_delta [1e-3], snapshot_every [0],
                 max_steps
    [monitors]   slack_max_principle [1e-6], slack_ratio [1e-6], slack_sign [1e-8],
                 slack_c0 [1e-6], fit_stability [0.01], fit_flat_tolerance [0.05]
    [stationary] solve [true], tol [1e-10]
    [output]     dir [run]
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

_SECTIONS = {
    "scenario": ("name", "N", "n", "m", "seed"),
    "flow": ("method", "dt0", "t_max", "tol_converge", "record_interval", "mask_delta", "snapshot_every",
             "max_steps"),
    "monitors": ("slack_max_principle", "slack_ratio", "slack_sign", "slack_c0", "fit_stability",
                 "fit_flat_tolerance"),
    "stationary": ("solve", "tol"),
    "output": ("dir",),
}
# attribute name for keys whose INI name is ambiguous across sections
_ATTR = {("stationary", "solve"): "solve_stationary", ("stationary", "tol"): "tol_stationary",
         ("output", "dir"): "out_dir", ("scenario", "name"): "scenario"}
_POSITIVE = ("t_max", "tol_converge", "record_interval", "mask_delta", "slack_max_principle", "slack_ratio",
             "slack_sign", "slack_c0", "fit_stability", "fit_flat_tolerance", "tol_stationary", "dt0")


@dataclass
class RunConfig:
    scenario: str = "strict"
    N: int | None = None
    n: int | None = None
    m: int | None = None
    seed: int = 0
    method: str = "rk4"
    dt0: float | None = None
    t_max: float = 10.0
    tol_converge: float = 1e-8
    record_interval: float = 0.1
    mask_delta: float = 1e-3
    snapshot_every: int = 0
    max_steps: int | None = None
    slack_max_principle: float = 1e-6
    slack_ratio: float = 1e-6
    slack_sign: float = 1e-8
    slack_c0: float = 1e-6
    fit_stability: float = 0.01
    fit_flat_tolerance: float = 0.05
    solve_stationary: bool = True
    tol_stationary: float = 1e-10
    out_dir: str = "run"

    def validate(self, lines: dict[str, int] | None = None) -> "RunConfig":
        lines = lines or {}

        def fail(name, msg):
            raise ConfigError(msg, field=name, line=lines.get(name))

        for name in _POSITIVE:
            v = getattr(self, name)
            if v is not None and not v > 0:
                fail(name, f"must be positive, got {v}")
        if self.N is not None and (self.N < 4 or self.N % 2):
            fail("N", f"grid size must be even and >= 4, got {self.N}")
        if self.n is not None and not 2 <= self.n <= 4:
            fail("n", f"dimension must be in 2..4, got {self.n}")
        if self.m is not None and not 1 <= self.m < (self.n or 4):
            fail("m", f"degree must satisfy 1 <= m < n, got {self.m}")
        if self.method not in ("rk4", "explicit-euler"):
            fail("method", f"unknown integrator {self.method!r}")
        if self.snapshot_every < 0:
            fail("snapshot_every", "must be >= 0")
        if self.max_steps is not None and self.max_steps <= 0:
            fail("max_steps", "must be positive")
        return self

    def flow_config(self):
        from .flow import FlowConfig

        return FlowConfig(method=self.method, dt0=self.dt0, t_max=self.t_max, tol_converge=self.tol_converge,
                          record_interval=self.record_interval, mask_delta=self.mask_delta,
                          slack_max_principle=self.slack_max_principle, slack_ratio=self.slack_ratio,
                          slack_sign=self.slack_sign, slack_c0=self.slack_c0, fit_stability=self.fit_stability,
                          fit_flat_tolerance=self.fit_flat_tolerance, max_steps=self.max_steps,
                          snapshot_every=self.snapshot_every)

    def to_text(self) -> str:
        out = []
        for section, keys in _SECTIONS.items():
            out.append(f"[{section}]")
            for key in keys:
                v = getattr(self, _ATTR.get((section, key), key))
                if v is None:
                    continue
                if isinstance(v, bool):
                    v = "true" if v else "false"
                out.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
            out.append("")
        return "\n".join(out)


def _key_lines(text: str) -> dict[str, int]:
    """Map attribute name -> 1-based line of its definition."""
    found = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip()
            found.setdefault(f"[{section}]", i)
            continue
        m = re.match(r"^([A-Za-z_][\w]*)\s*[=:]", s)
        if m and section:
            key = m.group(1)
            found[_ATTR.get((section, key), key)] = i
    return found


def _convert(name: str, raw: str, line: int | None):
    types = {f.name: f.type for f in fields(RunConfig)}
    t = str(types[name])
    raw = raw.strip()
    try:
        if raw.lower() in ("", "none") and "None" in t:
            return None
        if t.startswith("bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        kind = t.split(" ")[0].split("|")[0]
        raise ConfigError(f"cannot parse {raw!r} as {kind}", field=name, line=line) from None


def parse_config(text: str) -> RunConfig:
    lines = _key_lines(text)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], line=line) from None
    values = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", line=lines.get(f"[{section}]"))
        for key, raw in cp.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key in [{section}]", field=key, line=lines.get(key))
            name = _ATTR.get((section, key), key)
            values[name] = _convert(name, raw, lines.get(name))
    cfg = RunConfig(**values)
    return cfg.validate(lines)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return parse_config(text)


def replace_config(cfg: RunConfig, **changes) -> RunConfig:
    return dataclasses.replace(cfg, **changes).validate()
