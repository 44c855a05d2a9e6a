"""Experiment configuration: YAML schema, validation and shipped presets.

Schema (all sections optional except ``experiment``)::

    experiment: null-control
    seed: 0
    grid: {n_modes: 64}
    time: {dt: 1.0e-3, T: 1.0}
    lam: [1.0, -1.0]
    geometry: {omega: [0.0, 1.5707963267948966], plateau: null,
               mirrored: false, constant: false, ramp: 0.5}
    tolerances: {cg: 1.0e-10, cg_max_iter: 500, picard: 1.0e-10, steer: 1.0e-4}
    params: {...}             # experiment specific, see PARAM_DEFAULTS
    output: {dir: out, threads: 1}
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError

EXPERIMENTS = ("simulate", "stabilize", "linear-control", "null-control", "steer",
               "xsb-probe", "estimate-scan", "observability")

# experiments that need T to be a whole number of steps
MESHED = ("linear-control", "null-control", "steer", "observability")

TOLERANCE_DEFAULTS = {"cg": 1e-10, "cg_max_iter": 500, "picard": 1e-10, "steer": 1e-4}

PARAM_DEFAULTS = {
    "simulate": {
        "initial": "plane_wave",      # plane_wave | random
        "amplitude": 0.5, "k": 3, "kmax": 2, "norm": 1.0,
        "damping": False, "order_check": False, "reference_factor": 16,
        "refine_check": False, "tail_monitor": None, "dump": False,
    },
    "stabilize": {
        "R0": [1.0, 5.0], "n_samples": 20, "kmax": None, "t_final": 10.0,
        "fit_window": [1.0, 10.0], "threshold": None, "t_max": 50.0,
    },
    "linear-control": {"kmax": None, "n_samples": 1, "max_iter": 200, "n_hermitian": 5,
                       "dump": False},
    "null-control": {
        "mode": "solve",              # solve | k_scaling
        "amplitude": 1e-2, "modes": {1: 0.7071067811865476, -2: 0.7071067811865476},
        "compare_linear": True, "eps": [1e-2, 1e-1], "n_eps": 7,
        "s_list": [0.0, 1.0, 2.0], "refine": False, "threshold_scan": False, "dump": False,
    },
    "steer": {"norm0": 1.0, "norm1": 1.0, "kmax": None, "parity": "none", "gate": None,
              "t_max": 80.0, "dump": False},
    "xsb-probe": {
        "probe": "multiplication_loss",   # multiplication_loss | duhamel_gain
        "b_list": [0.25, 0.5, 0.75], "n_list": [4, 8, 16, 32], "n_time": 512,
        "pairs": [[0.625, 0.375], [0.625, 0.25]],
        "T_list": [0.015625, 0.03125, 0.0625, 0.125],
    },
    "estimate-scan": {
        "probe": "l4",                    # l4 | trilinear | difference
        "n_samples": 200, "kmax": 8, "k_list": list(range(1, 17)), "n_time": 256,
        "t1": 1.0, "s": 2.0, "baseline_s": 0.0, "b": 0.375, "s_list": [0.0, 1.0],
    },
    "observability": {
        "kind": "gramian",                # gramian | damped
        "n_obs": None, "dense_check": True,
        "nested_plateaus": [[0.5890486225480862, 0.9817477042468103],
                            [0.39269908169872414, 1.1780972450961930],
                            [0.19634954084936207, 1.3744467859455345]],
        "R0": [1.0, 5.0], "n_samples": 10, "kmax": None,
    },
}


def _as_pair(v, name):
    try:
        lo, hi = (float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a pair of numbers, got {v!r}")
    return (lo, hi)


def _merge_params(experiment, params):
    defaults = PARAM_DEFAULTS[experiment]
    unknown = sorted(set(params) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown params for {experiment}: {', '.join(map(str, unknown))}")
    merged = copy.deepcopy(defaults)
    merged.update(copy.deepcopy(params))
    return merged


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n_modes: int = 64
    dt: float = 1e-3
    T: float = 1.0
    lam: tuple = (1.0,)
    omega: tuple = (0.0, float(np.pi / 2))
    plateau: tuple | None = None
    mirrored: bool = False
    constant: bool = False
    ramp: float = 0.5
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCE_DEFAULTS))
    seed: int = 0
    out: str = "out"
    threads: int = 1
    params: dict = field(default_factory=dict)

    # -- construction -----------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a mapping")
        d = copy.deepcopy(d)
        known = {"experiment", "seed", "grid", "time", "lam", "geometry", "tolerances",
                 "params", "output"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown sections: {', '.join(unknown)}")
        exp = d.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
        grid = d.get("grid") or {}
        time = d.get("time") or {}
        geo = d.get("geometry") or {}
        out = d.get("output") or {}
        for name, sec, keys in (("grid", grid, {"n_modes"}), ("time", time, {"dt", "T"}),
                                ("geometry", geo, {"omega", "plateau", "mirrored",
                                                   "constant", "ramp"}),
                                ("output", out, {"dir", "threads"}),
                                ("tolerances", d.get("tolerances") or {},
                                 set(TOLERANCE_DEFAULTS))):
            if not isinstance(sec, dict):
                raise ConfigError(f"section {name} must be a mapping")
            extra = sorted(set(sec) - keys)
            if extra:
                raise ConfigError(f"unknown keys in {name}: {', '.join(extra)}")
        lam = d.get("lam", [1.0])
        lam = lam if isinstance(lam, (list, tuple)) else [lam]
        tol = dict(TOLERANCE_DEFAULTS)
        tol.update(d.get("tolerances") or {})
        params = d.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("params must be a mapping")
        try:
            cfg = cls(
                experiment=exp,
                n_modes=grid.get("n_modes", 64),
                dt=float(time.get("dt", 1e-3)),
                T=float(time.get("T", 1.0)),
                lam=tuple(float(x) for x in lam),
                omega=_as_pair(geo.get("omega", (0.0, np.pi / 2)), "geometry.omega"),
                plateau=None if geo.get("plateau") is None
                else _as_pair(geo["plateau"], "geometry.plateau"),
                mirrored=bool(geo.get("mirrored", False)),
                constant=bool(geo.get("constant", False)),
                ramp=float(geo.get("ramp", 0.5)),
                tolerances=tol,
                seed=d.get("seed", 0),
                out=str(out.get("dir", "out")),
                threads=out.get("threads", 1),
                params=_merge_params(exp, params),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "grid": {"n_modes": self.n_modes},
            "time": {"dt": self.dt, "T": self.T},
            "lam": list(self.lam),
            "geometry": {"omega": list(self.omega),
                         "plateau": None if self.plateau is None else list(self.plateau),
                         "mirrored": self.mirrored, "constant": self.constant,
                         "ramp": self.ramp},
            "tolerances": dict(self.tolerances),
            "params": copy.deepcopy(self.params),
            "output": {"dir": self.out, "threads": self.threads},
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_yaml(text)

    def override(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    # -- validation ----------------------------------------------------------------

    def validate(self):
        N = self.n_modes
        if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 8 or N % 2:
            raise ConfigError(f"grid.n_modes must be an even integer >= 8, got {N!r}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("time.dt must be positive")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ConfigError("time.T must be positive")
        if self.experiment in MESHED:
            n = self.T / self.dt
            if abs(n - round(n)) > 1e-9 * n:
                raise ConfigError("time.T must be an integer multiple of time.dt")
        if not self.lam or not all(np.isfinite(self.lam)):
            raise ConfigError("lam must be a non-empty list of finite numbers")
        lo, hi = self.omega
        if not (0.0 <= lo < hi <= 2 * np.pi + 1e-12):
            raise ConfigError("geometry.omega must satisfy 0 <= lo < hi <= 2 pi")
        if self.mirrored and hi > np.pi + 1e-12:
            raise ConfigError("mirrored geometry needs omega inside [0, pi]")
        if self.plateau is not None:
            p0, p1 = self.plateau
            if not lo <= p0 <= p1 <= hi:
                raise ConfigError("geometry.plateau must lie inside omega")
        if not self.ramp >= 0:
            raise ConfigError("geometry.ramp must be nonnegative")
        for k in ("cg", "picard", "steer"):
            if not float(self.tolerances[k]) > 0:
                raise ConfigError(f"tolerances.{k} must be positive")
        if int(self.tolerances["cg_max_iter"]) < 1:
            raise ConfigError("tolerances.cg_max_iter must be >= 1")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) \
                or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if isinstance(self.threads, bool) or not isinstance(self.threads, (int, np.integer)) \
                or self.threads < 1:
            raise ConfigError("output.threads must be a positive integer")
        _validate_params(self)


def _validate_params(cfg: ExperimentConfig):
    p = cfg.params
    e = cfg.experiment
    N = cfg.n_modes

    def positive(name):
        if not (isinstance(p[name], (int, float)) and p[name] > 0):
            raise ConfigError(f"params.{name} must be positive")

    if e == "simulate":
        if p["initial"] not in ("plane_wave", "random"):
            raise ConfigError("params.initial must be plane_wave or random")
        if abs(int(p["k"])) >= N // 2:
            raise ConfigError("params.k must be a resolved mode")
        positive("reference_factor")
    elif e == "stabilize":
        positive("n_samples")
        positive("t_final")
        if any(r <= 0 for r in p["R0"]):
            raise ConfigError("params.R0 entries must be positive")
        ta, tb = _as_pair(p["fit_window"], "params.fit_window")
        if not 0 <= ta < tb <= p["t_final"]:
            raise ConfigError("params.fit_window must lie inside [0, t_final]")
        if p["threshold"] is not None and not p["threshold"] > 0:
            raise ConfigError("params.threshold must be positive")
    elif e == "linear-control":
        positive("n_samples")
        positive("max_iter")
    elif e == "null-control":
        if p["mode"] not in ("solve", "k_scaling"):
            raise ConfigError("params.mode must be solve or k_scaling")
        if not p["amplitude"] >= 0:
            raise ConfigError("params.amplitude must be nonnegative")
        if any(abs(int(k)) >= N // 2 for k in p["modes"]):
            raise ConfigError("params.modes must be resolved modes")
        e0, e1 = _as_pair(p["eps"], "params.eps")
        if not 0 < e0 < e1:
            raise ConfigError("params.eps must be an increasing positive pair")
    elif e == "steer":
        if p["parity"] not in ("none", "odd", "even"):
            raise ConfigError("params.parity must be none, odd or even")
        if p["parity"] != "none" and not (cfg.mirrored or cfg.constant):
            raise ConfigError("parity-preserving steering needs an even control region "
                              "(geometry.mirrored or geometry.constant)")
        if p["norm0"] < 0 or p["norm1"] < 0:
            raise ConfigError("params.norm0 / norm1 must be nonnegative")
    elif e == "xsb-probe":
        if p["probe"] not in ("multiplication_loss", "duhamel_gain"):
            raise ConfigError("params.probe must be multiplication_loss or duhamel_gain")
        if p["probe"] == "multiplication_loss":
            if any(not 0 <= b < 1 for b in p["b_list"]):
                raise ConfigError("params.b_list entries must lie in [0, 1)")
            if max(p["n_list"]) > N / 3:
                raise ConfigError(f"params.n_list exceeds N/3 = {N / 3:.1f}")
        else:
            for b, bp in p["pairs"]:
                if not (0 < bp < 0.5 < b and b + bp <= 1 + 1e-12):
                    raise ConfigError(f"pair ({b}, {bp}) violates 0 < b' < 1/2 < b, b+b' <= 1")
            if any(not 0 < T <= 1 for T in p["T_list"]):
                raise ConfigError("params.T_list must lie in (0, 1]")
    elif e == "estimate-scan":
        if p["probe"] not in ("l4", "trilinear", "difference"):
            raise ConfigError("params.probe must be l4, trilinear or difference")
        positive("n_samples")
        if p["kmax"] >= N // 2:
            raise ConfigError("params.kmax must be below N/2")
        if abs(p["b"]) > 1:
            raise ConfigError("params.b must satisfy |b| <= 1")
    elif e == "observability":
        if p["kind"] not in ("gramian", "damped"):
            raise ConfigError("params.kind must be gramian or damped")
        if p["n_obs"] is not None and not 1 <= p["n_obs"] <= N:
            raise ConfigError("params.n_obs must lie in [1, N]")


# -- presets -----------------------------------------------------------------------

def preset_names():
    root = resources.files("nlscontrol") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset(name: str) -> ExperimentConfig:
    root = resources.files("nlscontrol") / "presets"
    path = root / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return ExperimentConfig.from_yaml(path.read_text())
