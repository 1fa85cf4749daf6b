"""Experiment configuration in INI form.

Example::

    [problem]
    kind = basis_pursuit
    n = 100
    p = 200
    rho = 0.5
    sparsity = 20
    seed = 0

    [solver.spdhg]
    gamma = 0.99

    [solver.fb_vc_cd]
    gamma = 0.99

    [run]
    seeds = 0-9
    max_epochs = 300
    log_every_epochs = 1
    metrics = dist_to_ref, kkt_residual

    [reference]
    mode = pdhg_oracle
    tol = 1e-12

    [output]
    dir = out/bp

A data file replaces the generator keys with ``file = data.libsvm`` plus
``kind`` (``lasso``, ``ridge`` or ``svm_hinge``), ``lam`` and optionally
``normalize``, ``p_override``, ``lam_relative`` and ``block_size``.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..diagnostics.records import METRICS
from ..problems import GeneratorSpec

__all__ = ["ConfigError", "SolverEntry", "FileProblem", "ExperimentConfig", "load_config",
           "parse_config", "METHODS", "DEFAULT_SEEDS"]

METHODS = ("spdhg", "spdhg_mu", "pdhg", "fb_vc_cd", "svrg", "sdca")
DEFAULT_SEEDS = tuple(range(10))


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


@dataclass(frozen=True)
class SolverEntry:
    """One method with its ``gamma`` and extra keyword overrides."""

    method: str
    gamma: float = 0.99
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class FileProblem:
    """A LIBSVM data file turned into a Lasso, ridge or SVM problem."""

    file: str
    kind: str = "lasso"
    lam: float = 0.1
    normalize: bool = False
    p_override: int | None = None
    lam_relative: bool = False
    block_size: int = 1


@dataclass
class ExperimentConfig:
    problem: GeneratorSpec | FileProblem
    solvers: list
    seeds: tuple = DEFAULT_SEEDS
    max_epochs: float = 100.0
    log_every_epochs: float = 1.0
    metrics: tuple = ("kkt_residual",)
    reference_mode: str = "pdhg_oracle"
    reference_tol: float = 1e-12
    reference_path: str | None = None
    output_dir: str = "out"
    track_ergodic: bool = False
    stop_metric: str | None = None
    stop_tol: float = 0.0
    plot_metric: str | None = None

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.metrics = tuple(self.metrics)
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.metrics:
            raise ConfigError("at least one metric is required")
        if not self.solvers:
            raise ConfigError("at least one solver section is required")
        for name in self.metrics:
            base = name[:-4] if name.endswith("_avg") else name
            if base not in METRICS:
                raise ConfigError(f"unknown metric {name!r}")
        if self.max_epochs < 0 or self.log_every_epochs < 0:
            raise ConfigError("epoch counts must be nonnegative")
        if self.reference_mode not in ("pdhg_oracle", "planted", "file", "none"):
            raise ConfigError(f"unknown reference mode {self.reference_mode!r}")

    # -- serialization -------------------------------------------------
    def to_dict(self):
        prob = asdict(self.problem)
        prob["source"] = "file" if isinstance(self.problem, FileProblem) else "generator"
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["problem"] = prob
        out["solvers"] = [asdict(s) for s in self.solvers]
        out["seeds"] = list(self.seeds)
        out["metrics"] = list(self.metrics)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        prob = dict(data.pop("problem"))
        source = prob.pop("source", "generator")
        problem = FileProblem(**prob) if source == "file" else GeneratorSpec(**prob)
        solvers = [SolverEntry(s["method"], float(s.get("gamma", 0.99)), dict(s.get("overrides", {})))
                   for s in data.pop("solvers")]
        return cls(problem=problem, solvers=solvers, **data)

    def with_seeds(self, seeds):
        d = self.to_dict()
        d["seeds"] = list(seeds)
        return ExperimentConfig.from_dict(d)

    def with_output(self, path):
        d = self.to_dict()
        d["output_dir"] = str(path)
        return ExperimentConfig.from_dict(d)


# ----------------------------------------------------------------------
# INI parsing

_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _bool(s):
    try:
        return _BOOL[s.strip().lower()]
    except KeyError:
        raise ConfigError(f"not a boolean: {s!r}") from None


def _list(s):
    return tuple(t.strip() for t in s.replace(";", ",").split(",") if t.strip())


def _seeds(s):
    """``0-9``, ``0, 3, 7`` or a mix of both."""
    out = []
    for tok in _list(s):
        lo, sep, hi = tok.partition("-")
        if sep and lo:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return tuple(out)


def _coerce(value, typ):
    if typ is bool:
        return _bool(value)
    if typ is int:
        return int(value)
    if typ is float:
        return float(value)
    return value


_GEN_TYPES = {"kind": str, "n": int, "p": int, "rho": float, "sparsity": int, "lam": float,
              "seed": int, "block_size": int, "margin": float, "lam_relative": bool,
              "noise_variance": float}
_FILE_TYPES = {"file": str, "kind": str, "lam": float, "normalize": bool, "p_override": int,
               "lam_relative": bool, "block_size": int}


def parse_config(text, base_dir=None):
    """Parse INI text into an ``ExperimentConfig``.

    Relative data and reference paths are resolved against ``base_dir``.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if not cp.has_section("problem"):
        raise ConfigError("missing [problem] section")
    base = Path(base_dir) if base_dir is not None else None

    def resolve(path):
        p = Path(path)
        return str(base / p) if base is not None and not p.is_absolute() else str(p)

    sec = cp["problem"]
    try:
        if "file" in sec:
            kw = {}
            for key, val in sec.items():
                if key not in _FILE_TYPES:
                    raise ConfigError(f"unknown [problem] key {key!r} for a data file")
                kw[key] = _coerce(val, _FILE_TYPES[key])
            kw["file"] = resolve(kw["file"])
            problem = FileProblem(**kw)
        else:
            kw = {}
            for key, val in sec.items():
                if key not in _GEN_TYPES:
                    raise ConfigError(f"unknown [problem] key {key!r}")
                kw[key] = _coerce(val, _GEN_TYPES[key])
            problem = GeneratorSpec(**kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[problem]: {exc}") from exc

    solvers = []
    for name in cp.sections():
        if not name.startswith("solver."):
            continue
        method = name.split(".", 1)[1]
        opts = dict(cp[name])
        gamma = float(opts.pop("gamma", 0.99))
        overrides = {}
        for key, val in opts.items():
            try:
                overrides[key] = int(val)
            except ValueError:
                try:
                    overrides[key] = float(val)
                except ValueError:
                    overrides[key] = val
        solvers.append(SolverEntry(method, gamma, overrides))

    kw = {"problem": problem, "solvers": solvers}
    if cp.has_section("run"):
        run = cp["run"]
        if "seeds" in run:
            kw["seeds"] = _seeds(run["seeds"])
        for key, typ in (("max_epochs", float), ("log_every_epochs", float),
                         ("stop_tol", float)):
            if key in run:
                kw[key] = typ(run[key])
        if "metrics" in run:
            kw["metrics"] = _list(run["metrics"])
        if "track_ergodic" in run:
            kw["track_ergodic"] = _bool(run["track_ergodic"])
        if run.get("stop_metric", "").strip():
            kw["stop_metric"] = run["stop_metric"].strip()
        if run.get("plot_metric", "").strip():
            kw["plot_metric"] = run["plot_metric"].strip()
    if cp.has_section("reference"):
        ref = cp["reference"]
        kw["reference_mode"] = ref.get("mode", "pdhg_oracle").strip()
        kw["reference_tol"] = float(ref.get("tol", "1e-12"))
        if ref.get("path", "").strip():
            kw["reference_path"] = resolve(ref["path"].strip())
    if cp.has_section("output"):
        kw["output_dir"] = cp["output"].get("dir", "out").strip()
    return ExperimentConfig(**kw)


def load_config(path):
    """Load an INI config, or the ``config`` entry of a ``run.json``."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        return ExperimentConfig.from_dict(data["config"] if "config" in data else data)
    return parse_config(text, base_dir=path.parent)
