"""Run configuration: strict JSON schema, presets, dotted-key overrides.

A RunConfig is pure data. Parsing rejects unknown keys at every level and
round-trips exactly: from_dict(cfg.to_dict()) == cfg. Pump strength is given
as exactly one of pump_fraction (of the critical amplitude), eps (equal
pumps), or the eps1/eps2 pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import SystemParams

SCHEMA = "opodimer-run/1"

PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6")

THETA_POLICIES = ("fixed", "optimize")
THETA_OBJECTIVES = ("squeezing", "duan", "epr")
DUAN_PAIRINGS = ("xminus_yplus", "xplus_yminus")
STABILITY_MODES = ("coupling-grid", "pump-scan")
SDE_STEPPERS = ("semi-implicit-midpoint", "euler-maruyama")

_PUMP_KEYS = ("pump_fraction", "eps", "eps1", "eps2")


def _reject_unknown(d: dict, allowed, where: str) -> None:
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}; "
                          f"allowed: {sorted(allowed)}")


def _as_float(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number, got {v!r}")
    return float(v)


def _as_int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where} must be an integer, got {v!r}")
    return v


def _as_complex(v, where: str):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"{where} must be a number or [re, im], got {v!r}")
        return complex(_as_float(v[0], where + "[0]"), _as_float(v[1], where + "[1]"))
    return complex(_as_float(v, where))


def _complex_jsonable(z: complex):
    return z.real if z.imag == 0.0 else [z.real, z.imag]


@dataclass(frozen=True)
class ParamsSpec:
    kappa: float = 0.01
    gamma_a: float = 1.0
    gamma_b: float = 1.0
    J_a: float = 0.0
    J_b: float = 0.0
    Delta_a: float = 0.0
    Delta_b: float = 0.0
    pump_mode: str = "amplitude"
    pump_fraction: float = None
    eps1: complex = 0j
    eps2: complex = 0j

    _KEYS = ("kappa", "gamma_a", "gamma_b", "J_a", "J_b", "Delta_a", "Delta_b")

    @classmethod
    def from_dict(cls, d: dict, where: str = "params") -> "ParamsSpec":
        if not isinstance(d, dict):
            raise ConfigError(f"{where} must be an object, got {d!r}")
        _reject_unknown(d, cls._KEYS + _PUMP_KEYS, where)
        kw = {k: _as_float(d[k], f"{where}.{k}") for k in cls._KEYS if k in d}
        groups = [g for g in ("pump_fraction", "eps", "eps1")
                  if any(k in d for k in {"pump_fraction": ["pump_fraction"],
                                          "eps": ["eps"],
                                          "eps1": ["eps1", "eps2"]}[g])]
        if len(groups) > 1:
            raise ConfigError(
                f"{where}: give exactly one of pump_fraction, eps, or eps1/eps2")
        if "pump_fraction" in d:
            kw["pump_mode"] = "fraction"
            kw["pump_fraction"] = _as_float(d["pump_fraction"],
                                            f"{where}.pump_fraction")
        elif "eps" in d:
            e = _as_complex(d["eps"], f"{where}.eps")
            kw.update(pump_mode="amplitude", eps1=e, eps2=e)
        elif "eps1" in d or "eps2" in d:
            if not ("eps1" in d and "eps2" in d):
                raise ConfigError(f"{where}: eps1 and eps2 must be given together")
            kw.update(pump_mode="amplitude",
                      eps1=_as_complex(d["eps1"], f"{where}.eps1"),
                      eps2=_as_complex(d["eps2"], f"{where}.eps2"))
        return cls(**kw)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self._KEYS}
        if self.pump_mode == "fraction":
            d["pump_fraction"] = self.pump_fraction
        elif self.eps1 == self.eps2:
            d["eps"] = _complex_jsonable(self.eps1)
        else:
            d["eps1"] = _complex_jsonable(self.eps1)
            d["eps2"] = _complex_jsonable(self.eps2)
        return d

    def to_params(self) -> SystemParams:
        common = {k: getattr(self, k) for k in self._KEYS}
        if self.pump_mode == "fraction":
            return SystemParams.symmetric(pump_fraction=self.pump_fraction,
                                          **common)
        return SystemParams(eps1=self.eps1, eps2=self.eps2, **common)

    def patched(self, patch: dict, where: str) -> "ParamsSpec":
        """New spec with a subset of keys replaced; setting any pump key
        replaces the whole pump specification."""
        if not isinstance(patch, dict):
            raise ConfigError(f"{where} must be an object, got {patch!r}")
        d = self.to_dict()
        if any(k in patch for k in _PUMP_KEYS):
            for k in _PUMP_KEYS:
                d.pop(k, None)
        d.update(patch)
        return ParamsSpec.from_dict(d, where)


@dataclass(frozen=True)
class SweepSpec:
    omega_start: float = -20.0
    omega_stop: float = 20.0
    omega_points: int = 401

    @classmethod
    def from_dict(cls, d: dict, where: str = "sweep") -> "SweepSpec":
        _reject_unknown(d, ("omega_start", "omega_stop", "omega_points"), where)
        kw = {}
        for k in ("omega_start", "omega_stop"):
            if k in d:
                kw[k] = _as_float(d[k], f"{where}.{k}")
        if "omega_points" in d:
            n = _as_int(d["omega_points"], f"{where}.omega_points")
            if n < 1:
                raise ConfigError(f"{where}.omega_points must be >= 1, got {n}")
            kw["omega_points"] = n
        return cls(**kw)

    def to_dict(self) -> dict:
        return {"omega_start": self.omega_start, "omega_stop": self.omega_stop,
                "omega_points": self.omega_points}

    def omegas(self) -> np.ndarray:
        return np.linspace(self.omega_start, self.omega_stop, self.omega_points)


@dataclass(frozen=True)
class ThetaSpec:
    policy: str = "fixed"
    degrees: float = 0.0
    objective: str = "squeezing"
    at_omega: float = 0.0

    @classmethod
    def from_dict(cls, d: dict, where: str = "theta") -> "ThetaSpec":
        _reject_unknown(d, ("policy", "degrees", "objective", "at_omega"), where)
        policy = d.get("policy", "fixed")
        if policy not in THETA_POLICIES:
            raise ConfigError(f"{where}.policy must be one of {THETA_POLICIES}, "
                              f"got {policy!r}")
        if policy == "fixed":
            _reject_unknown(d, ("policy", "degrees"), where + ' (policy "fixed")')
            return cls(policy="fixed",
                       degrees=_as_float(d.get("degrees", 0.0), f"{where}.degrees"))
        _reject_unknown(d, ("policy", "objective", "at_omega"),
                        where + ' (policy "optimize")')
        objective = d.get("objective", "squeezing")
        if objective not in THETA_OBJECTIVES:
            raise ConfigError(f"{where}.objective must be one of "
                              f"{THETA_OBJECTIVES}, got {objective!r}")
        return cls(policy="optimize", degrees=0.0, objective=objective,
                   at_omega=_as_float(d.get("at_omega", 0.0), f"{where}.at_omega"))

    def to_dict(self) -> dict:
        if self.policy == "fixed":
            return {"policy": "fixed", "degrees": self.degrees}
        return {"policy": "optimize", "objective": self.objective,
                "at_omega": self.at_omega}


@dataclass(frozen=True)
class VariantSpec:
    label: str = None
    params_patch: tuple = ()
    theta: ThetaSpec = None

    @classmethod
    def from_dict(cls, d: dict, where: str) -> "VariantSpec":
        if not isinstance(d, dict):
            raise ConfigError(f"{where} must be an object, got {d!r}")
        _reject_unknown(d, ("label", "params", "theta"), where)
        label = d.get("label")
        if label is not None and not isinstance(label, str):
            raise ConfigError(f"{where}.label must be a string, got {label!r}")
        patch = d.get("params", {})
        if not isinstance(patch, dict):
            raise ConfigError(f"{where}.params must be an object, got {patch!r}")
        _reject_unknown(patch, ParamsSpec._KEYS + _PUMP_KEYS, f"{where}.params")
        theta = ThetaSpec.from_dict(d["theta"], f"{where}.theta") \
            if "theta" in d else None
        return cls(label=label, params_patch=tuple(sorted(patch.items())),
                   theta=theta)

    def to_dict(self) -> dict:
        d = {}
        if self.label is not None:
            d["label"] = self.label
        if self.params_patch:
            d["params"] = dict(self.params_patch)
        if self.theta is not None:
            d["theta"] = self.theta.to_dict()
        return d


@dataclass(frozen=True)
class StabilitySpec:
    mode: str = "coupling-grid"
    J_a: tuple = (0.0, 1.0, 2.0, 5.0, 10.0)
    J_b: tuple = (0.0, 1.0, 2.0, 5.0, 10.0)
    track_detuning: bool = False
    pump_fractions: tuple = (0.1, 0.25, 0.5, 0.75, 0.9, 0.99)

    @classmethod
    def from_dict(cls, d: dict, where: str = "stability") -> "StabilitySpec":
        mode = d.get("mode", "coupling-grid")
        if mode not in STABILITY_MODES:
            raise ConfigError(f"{where}.mode must be one of {STABILITY_MODES}, "
                              f"got {mode!r}")
        if mode == "coupling-grid":
            _reject_unknown(d, ("mode", "J_a", "J_b", "track_detuning"),
                            where + ' (mode "coupling-grid")')
        else:
            _reject_unknown(d, ("mode", "pump_fractions"),
                            where + ' (mode "pump-scan")')
        kw = {"mode": mode}
        if "track_detuning" in d:
            if not isinstance(d["track_detuning"], bool):
                raise ConfigError(f"{where}.track_detuning must be a boolean, "
                                  f"got {d['track_detuning']!r}")
            kw["track_detuning"] = d["track_detuning"]
        for k in ("J_a", "J_b", "pump_fractions"):
            if k in d:
                v = d[k]
                if not isinstance(v, (list, tuple)) or not v:
                    raise ConfigError(f"{where}.{k} must be a non-empty list")
                kw[k] = tuple(_as_float(x, f"{where}.{k}[{i}]")
                              for i, x in enumerate(v))
        return cls(**kw)

    def to_dict(self) -> dict:
        if self.mode == "coupling-grid":
            return {"mode": self.mode, "J_a": list(self.J_a),
                    "J_b": list(self.J_b),
                    "track_detuning": self.track_detuning}
        return {"mode": self.mode, "pump_fractions": list(self.pump_fractions)}


@dataclass(frozen=True)
class SdeSpec:
    dt: float = 0.01
    t_transient: float = 20.0
    t_measure: float = 200.0
    n_traj: int = 4096
    stepper: str = "semi-implicit-midpoint"
    record_stride: int = 5

    @classmethod
    def from_dict(cls, d: dict, where: str = "sde") -> "SdeSpec":
        _reject_unknown(d, ("dt", "t_transient", "t_measure", "n_traj",
                            "stepper", "record_stride"), where)
        kw = {}
        for k in ("dt", "t_transient", "t_measure"):
            if k in d:
                kw[k] = _as_float(d[k], f"{where}.{k}")
        for k in ("n_traj", "record_stride"):
            if k in d:
                kw[k] = _as_int(d[k], f"{where}.{k}")
        if "stepper" in d:
            if d["stepper"] not in SDE_STEPPERS:
                raise ConfigError(f"{where}.stepper must be one of "
                                  f"{SDE_STEPPERS}, got {d['stepper']!r}")
            kw["stepper"] = d["stepper"]
        return cls(**kw)

    def to_dict(self) -> dict:
        return {"dt": self.dt, "t_transient": self.t_transient,
                "t_measure": self.t_measure, "n_traj": self.n_traj,
                "stepper": self.stepper, "record_stride": self.record_stride}

    def to_sde_config(self, seed: int, record: str = "alpha"):
        from .sde import SdeConfig
        return SdeConfig(dt=self.dt, t_transient=self.t_transient,
                         t_measure=self.t_measure, n_traj=self.n_traj,
                         seed=seed, stepper=self.stepper,
                         record_stride=self.record_stride, record=record)


@dataclass(frozen=True)
class VerifySpec:
    omegas: tuple = (0.0, 0.5, 1.5, 3.0, 8.0)

    @classmethod
    def from_dict(cls, d: dict, where: str = "verify") -> "VerifySpec":
        _reject_unknown(d, ("omegas",), where)
        if "omegas" in d:
            v = d["omegas"]
            if not isinstance(v, (list, tuple)) or not v:
                raise ConfigError(f"{where}.omegas must be a non-empty list")
            return cls(omegas=tuple(_as_float(x, f"{where}.omegas[{i}]")
                                    for i, x in enumerate(v)))
        return cls()

    def to_dict(self) -> dict:
        return {"omegas": list(self.omegas)}


@dataclass(frozen=True)
class RunConfig:
    params: ParamsSpec = field(default_factory=ParamsSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    vary: tuple = ()
    theta: ThetaSpec = field(default_factory=ThetaSpec)
    duan_pairing: str = "xminus_yplus"
    epr_infer_from: int = 1
    combined: bool = False
    stability: StabilitySpec = field(default_factory=StabilitySpec)
    sde: SdeSpec = field(default_factory=SdeSpec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"run config must be an object, got {d!r}")
        _reject_unknown(d, ("schema", "params", "sweep", "vary", "theta",
                            "duan_pairing", "epr_infer_from", "combined",
                            "stability", "sde", "verify", "seed"), "run config")
        schema = d.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"unsupported schema {schema!r}; expected {SCHEMA!r}")
        kw = {}
        if "params" in d:
            kw["params"] = ParamsSpec.from_dict(d["params"])
        if "sweep" in d:
            kw["sweep"] = SweepSpec.from_dict(d["sweep"])
        if "vary" in d:
            if not isinstance(d["vary"], (list, tuple)):
                raise ConfigError(f"vary must be a list, got {d['vary']!r}")
            kw["vary"] = tuple(VariantSpec.from_dict(v, f"vary[{i}]")
                               for i, v in enumerate(d["vary"]))
        if "theta" in d:
            kw["theta"] = ThetaSpec.from_dict(d["theta"])
        if "duan_pairing" in d:
            if d["duan_pairing"] not in DUAN_PAIRINGS:
                raise ConfigError(f"duan_pairing must be one of {DUAN_PAIRINGS}, "
                                  f"got {d['duan_pairing']!r}")
            kw["duan_pairing"] = d["duan_pairing"]
        if "epr_infer_from" in d:
            v = _as_int(d["epr_infer_from"], "epr_infer_from")
            if v not in (1, 2):
                raise ConfigError(f"epr_infer_from must be 1 or 2, got {v}")
            kw["epr_infer_from"] = v
        if "combined" in d:
            if not isinstance(d["combined"], bool):
                raise ConfigError(f"combined must be a boolean, got "
                                  f"{d['combined']!r}")
            kw["combined"] = d["combined"]
        if "stability" in d:
            kw["stability"] = StabilitySpec.from_dict(d["stability"])
        if "sde" in d:
            kw["sde"] = SdeSpec.from_dict(d["sde"])
        if "verify" in d:
            kw["verify"] = VerifySpec.from_dict(d["verify"])
        if "seed" in d:
            kw["seed"] = _as_int(d["seed"], "seed")
        return cls(**kw)

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA, "params": self.params.to_dict(),
             "sweep": self.sweep.to_dict()}
        if self.vary:
            d["vary"] = [v.to_dict() for v in self.vary]
        d.update({"theta": self.theta.to_dict(),
                  "duan_pairing": self.duan_pairing,
                  "epr_infer_from": self.epr_infer_from,
                  "combined": self.combined,
                  "stability": self.stability.to_dict(),
                  "sde": self.sde.to_dict(),
                  "verify": self.verify.to_dict(),
                  "seed": self.seed})
        return d

    def variants(self) -> list:
        """Expanded (label, ParamsSpec, ThetaSpec) rows; a single implicit
        variant when vary is empty."""
        if not self.vary:
            return [(None, self.params, self.theta)]
        out = []
        for i, v in enumerate(self.vary):
            label = v.label
            if label is None:
                label = ",".join(f"{k}={val:g}" for k, val in v.params_patch) \
                    or f"v{i + 1}"
            out.append((label,
                        self.params.patched(dict(v.params_patch), f"vary[{i}]"),
                        v.theta if v.theta is not None else self.theta))
        return out


def load_config_file(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


def load_preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {PRESETS}")
    ref = resources.files("opodimer").joinpath("presets", f"{name}.json")
    return RunConfig.from_dict(json.loads(ref.read_text(encoding="utf-8")))


def apply_overrides(cfg: RunConfig, assignments) -> RunConfig:
    """Apply dotted-key overrides like params.J_a=2 or sde.n_traj=256.

    Values parse as JSON with a bare-string fallback. Setting any pump key
    displaces the previous pump specification. The result is re-validated
    from scratch, so unknown paths are rejected with the same messages as
    file input.
    """
    d = cfg.to_dict()
    for a in assignments:
        key, sep, raw = a.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {a!r} is not of the form key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        cur = d
        for part in parts[:-1]:
            nxt = cur.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {a!r}: {part} is not an object")
            cur = nxt
        leaf = parts[-1]
        if parts[:-1] == ["params"] and leaf in _PUMP_KEYS:
            keep = {"eps1", "eps2"} if leaf in ("eps1", "eps2") else {leaf}
            for k in _PUMP_KEYS:
                if k not in keep:
                    cur.pop(k, None)
        cur[leaf] = value
    return RunConfig.from_dict(d)
