"""Flat ``key = value`` run configuration with dotted section names."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError

SUBCOMMANDS = ("constants", "expand", "solve", "sweep", "trial")
DEFAULT_H = (0.02, 0.014, 0.01, 0.007, 0.005)


def _floats(text):
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc
    return vals


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {text!r}")


def _opt_float(text):
    t = str(text).strip().lower()
    return None if t in ("", "auto", "none") else float(t)


def _opt_int(text):
    t = str(text).strip().lower()
    return None if t in ("", "auto", "none") else int(t)


def _fmt(value):
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    command: str = field(default="sweep", metadata={"key": "command", "parse": str})
    curve: str = field(default="ellipse:2,1", metadata={"key": "curve", "parse": str})
    samples: int = field(default=4096, metadata={"key": "curve.samples", "parse": int})
    h: tuple = field(default=DEFAULT_H, metadata={"key": "h", "parse": _floats})
    level: int = field(default=2, metadata={"key": "level", "parse": int})
    out: str = field(default="magspec_out", metadata={"key": "out", "parse": str})
    threads: int | None = field(default=None, metadata={"key": "threads", "parse": _opt_int})
    deterministic: bool = field(default=True, metadata={"key": "deterministic", "parse": _bool})
    grid_L: float = field(default=12.0, metadata={"key": "grid.L", "parse": float})
    grid_n: int = field(default=8192, metadata={"key": "grid.n", "parse": int})
    tol_id: float = field(default=1e-6, metadata={"key": "tol.id", "parse": float})
    tol_fd: float = field(default=1e-4, metadata={"key": "tol.fd", "parse": float})
    strip_t0: float | None = field(default=None, metadata={"key": "strip.t0", "parse": _opt_float})
    strip_ds_scale: float = field(default=0.1, metadata={"key": "strip.ds_scale", "parse": float})
    strip_dtau: float = field(default=0.04, metadata={"key": "strip.dtau", "parse": float})
    strip_richardson: bool = field(default=True, metadata={"key": "strip.richardson", "parse": _bool})
    strip_fold: int | None = field(default=None, metadata={"key": "strip.fold", "parse": _opt_int})
    solve_k: int = field(default=2, metadata={"key": "solve.k", "parse": int})
    solve_dump_matrix: bool = field(default=False, metadata={"key": "solve.dump_matrix", "parse": _bool})
    disc_R: float | None = field(default=None, metadata={"key": "disc.R", "parse": _opt_float})
    disc_b: float = field(default=1.0, metadata={"key": "disc.b", "parse": float})
    disc_nr: int = field(default=4000, metadata={"key": "disc.nr", "parse": int})
    trial_alpha: float | None = field(default=None, metadata={"key": "trial.alpha", "parse": _opt_float})
    trial_plateau: float = field(default=0.75, metadata={"key": "trial.plateau", "parse": float})
    trial_clip_tol: float = field(default=1e-8, metadata={"key": "trial.clip_tol", "parse": float})
    trial_scan: bool = field(default=False, metadata={"key": "trial.scan", "parse": _bool})
    bpt_threshold: float = field(default=10.0, metadata={"key": "effective.bpt_threshold", "parse": float})
    bpt_remainder: float = field(default=1.0, metadata={"key": "effective.bpt_remainder", "parse": float})

    def __post_init__(self):
        if self.command not in SUBCOMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("tol_id", "tol_fd", "trial_clip_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{self.key_of(name)} must be positive")
        if not self.h:
            raise ConfigError("h list is empty")
        if any(v <= 0 for v in self.h):
            raise ConfigError("h values must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @classmethod
    def keys(cls):
        return {f.metadata["key"]: f.name for f in fields(cls)}

    @classmethod
    def key_of(cls, name):
        return {f.name: f.metadata["key"] for f in fields(cls)}[name]

    def to_text(self) -> str:
        return "".join(f"{f.metadata['key']} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        return (base or cls()).updated(parse_pairs(text))

    @classmethod
    def load(cls, path, base=None) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.from_text(fh.read(), base)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    def updated(self, pairs: dict) -> "RunConfig":
        """Return a copy with ``{dotted key: text}`` overrides applied."""
        spec = {f.metadata["key"]: f for f in fields(self)}
        changes = {}
        for k, v in pairs.items():
            if k not in spec:
                raise ConfigError(f"unknown config key {k!r}")
            f = spec[k]
            try:
                changes[f.name] = f.metadata["parse"](v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k}: {v!r}") from exc
        return replace(self, **changes)

    def output_dir(self) -> str:
        return os.environ.get("MAGSPEC_OUT") or self.out


def parse_pairs(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
