"""Command-line front end: sweeps, stability maps, angle optimization,
SDE verification, and raw trajectory dumps.

Exit codes: 0 success, 1 usage or runtime error, 2 above-threshold
configuration, 3 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from itertools import product
from pathlib import Path

import numpy as np

from . import criteria, sde, spectrum
from .config import (PRESETS, RunConfig, apply_overrides, load_config_file,
                     load_preset)
from .errors import AboveThresholdError, OpodimerError
from .linearized import build_linear_model
from .model import derived_scales, steady_state, stability_eigenvalues, threshold_bisection

CSV_SCHEMA = "opodimer-csv/1"

_Z_LIMIT = 3.0


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here reserves 2 for
    above-threshold configs, so usage errors exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _emit(lines, out_path) -> None:
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)


def _header(command: str, cfg: RunConfig) -> list:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return [f"# {CSV_SCHEMA}", f"# command: {command}", f"# config: {blob}"]


def _resolve_theta(p, theta_spec, cfg: RunConfig) -> float:
    if theta_spec.policy == "fixed":
        return math.radians(theta_spec.degrees)
    t, _ = criteria.optimize_angle(p, theta_spec.at_omega, theta_spec.objective,
                                   pairing=cfg.duan_pairing,
                                   infer_from=cfg.epr_infer_from)
    return t


def cmd_spectrum(args, cfg: RunConfig) -> int:
    variants = cfg.variants()
    multi = len(variants) > 1
    lines = _header("spectrum", cfg)
    cols = ["omega", "theta_deg", "S_X", "S_Y", "cov_XY", "duan_sum",
            "epr_product", "flags"]
    if cfg.combined:
        cols += ["S_Xp", "S_Yp", "S_Xm", "S_Ym"]
    if multi:
        cols.append("variant")
    rows = []
    for label, pspec, tspec in variants:
        p = pspec.to_params()
        steady_state(p)  # threshold gate; AboveThreshold -> exit 2
        scales = derived_scales(p)
        theta = _resolve_theta(p, tspec, cfg)
        name = label if label is not None else "-"
        lines.append(f"# variant {name}: params="
                     + json.dumps(pspec.to_dict(), sort_keys=True,
                                  separators=(",", ":"))
                     + f" theta_deg={math.degrees(theta):.12g}"
                     + f" eps_crit={scales.eps_crit:.12g}")
        for w in cfg.sweep.omegas():
            r = criteria.evaluate_record(p, float(w), theta,
                                         duan_pairing=cfg.duan_pairing,
                                         epr_infer_from=cfg.epr_infer_from)
            row = [r.omega, math.degrees(r.theta), r.S_X, r.S_Y, r.cov_XY,
                   r.duan_sum, r.epr_product, ";".join(r.flags()) or "-"]
            if cfg.combined:
                cv = criteria.combined_variances(p, float(w))
                row += [cv["S_Xp"], cv["S_Yp"], cv["S_Xm"], cv["S_Ym"]]
            if multi:
                row.append(name)
            rows.append(",".join(_fmt(x) for x in row))
    lines.append(",".join(cols))
    lines.extend(rows)
    _emit(lines, args.out)
    return 0


def cmd_stability(args, cfg: RunConfig) -> int:
    lines = _header("stability", cfg)
    spec = cfg.stability
    if spec.mode == "coupling-grid":
        lines.append("J_a,J_b,min_re_eig,eps_crit_analytic,eps_crit_bisect")
        for ja, jb in product(spec.J_a, spec.J_b):
            patch = {"J_a": ja, "J_b": jb}
            if spec.track_detuning:
                patch.update(Delta_a=ja, Delta_b=jb)
            p = cfg.params.patched(patch, "stability grid").to_params()
            min_re = float(np.min(stability_eigenvalues(p).real))
            lines.append(",".join(_fmt(x) for x in (
                ja, jb, min_re, derived_scales(p).eps_crit,
                threshold_bisection(p))))
    else:
        lines.append("pump_fraction,eps,min_re_eig,eps_crit_analytic,"
                     "eps_crit_bisect")
        for f in spec.pump_fractions:
            p = cfg.params.patched({"pump_fraction": f}, "pump scan").to_params()
            min_re = float(np.min(stability_eigenvalues(p).real))
            lines.append(",".join(_fmt(x) for x in (
                f, abs(p.eps1), min_re, derived_scales(p).eps_crit,
                threshold_bisection(p))))
    _emit(lines, args.out)
    return 0


def cmd_optimize_angle(args, cfg: RunConfig) -> int:
    p = cfg.params.to_params()
    steady_state(p)
    objective = args.objective or (
        cfg.theta.objective if cfg.theta.policy == "optimize" else "squeezing")
    omega = args.omega if args.omega is not None else (
        cfg.theta.at_omega if cfg.theta.policy == "optimize" else 0.0)
    t, v = criteria.optimize_angle(p, omega, objective,
                                   pairing=cfg.duan_pairing,
                                   infer_from=cfg.epr_infer_from)
    lines = _header("optimize-angle", cfg)
    lines.append("omega,objective,theta_deg,value")
    lines.append(",".join(_fmt(x) for x in (omega, objective,
                                            math.degrees(t), v)))
    _emit(lines, args.out)
    return 0


_VERIFY_COMBOS = ("X1", "Y1", "Xminus", "Yplus")


def _combo_terms(name: str, theta: float) -> list:
    half = math.pi / 2
    return {
        "X1": [(1, theta, 1.0)],
        "Y1": [(1, theta + half, 1.0)],
        "Xminus": [(1, theta, 1.0), (2, theta, -1.0)],
        "Yplus": [(1, theta + half, 1.0), (2, theta + half, 1.0)],
    }[name]


def cmd_verify(args, cfg: RunConfig) -> int:
    p = cfg.params.to_params()
    model = build_linear_model(p, steady_state(p))
    if args.negative_control:
        A = np.array(model.A)
        for i, j in ((0, 1), (1, 0), (2, 3), (3, 2)):
            A[i, j] = -A[i, j]
        A.setflags(write=False)
        model = dataclasses.replace(model, A=A)
    theta = _resolve_theta(p, cfg.theta, cfg)
    seed = args.seed if args.seed is not None else cfg.seed
    ens = sde.integrate(p, cfg.sde.to_sde_config(seed))
    report = []
    worst = 0.0
    for name in _VERIFY_COMBOS:
        terms = _combo_terms(name, theta)
        est = sde.estimate_output_spectrum(ens, terms)
        for w in cfg.verify.omegas:
            wbin, val, err = est.nearest(w)
            pred = spectrum.output_moment(spectrum.spectral_matrix(model, wbin),
                                          terms, terms, p.gamma_a)
            diff = val - pred
            if err > 0.0:
                z = diff / err
            else:
                z = 0.0 if diff == 0.0 else math.inf
            worst = max(worst, abs(z))
            report.append((name, wbin, val, err, pred, z))
    lines = _header("verify", cfg)
    lines.append("combination,omega,sde_value,sde_stderr,linear_value,z")
    for name, wbin, val, err, pred, z in report:
        lines.append(",".join(_fmt(x) for x in (name, wbin, val, err, pred, z)))
    ok = worst < _Z_LIMIT
    lines.append(f"# diverged: {ens.n_diverged} of {ens.n_traj}")
    lines.append(f"# verdict: {'PASS' if ok else 'FAIL'} "
                 f"(max |z| = {worst:.3g}, limit {_Z_LIMIT:g})")
    _emit(lines, args.out)
    if args.out:
        print(f"verify: {'PASS' if ok else 'FAIL'} (max |z| = {worst:.3g})")
    return 0 if ok else 3


def cmd_sde_dump(args, cfg: RunConfig) -> int:
    p = cfg.params.to_params()
    seed = args.seed if args.seed is not None else cfg.seed
    ens = sde.integrate(p, cfg.sde.to_sde_config(seed, record="all"))
    path = sde.write_ensemble_dump(ens, args.out)
    print(f"wrote {ens.n_traj} trajectories x {ens.n_samples} samples "
          f"({ens.n_diverged} diverged) to {path} (+ .json sidecar)")
    return 0


def _add_common(sub: argparse.ArgumentParser, out_required: bool = False):
    src = sub.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="JSON run config")
    src.add_argument("--preset", choices=PRESETS,
                     help="bundled demonstration config")
    sub.add_argument("--set", metavar="KEY=VALUE", action="append",
                     default=[], dest="overrides",
                     help="dotted-key config override, repeatable "
                          "(e.g. params.J_a=2)")
    sub.add_argument("--out", metavar="PATH", required=out_required,
                     help="output file (default: stdout)" if not out_required
                     else "output file")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opodimer",
                     description="Coupled-downconverter squeezing and "
                                 "entanglement calculator")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("spectrum", help="frequency sweep of output spectra "
                        "and witnesses")
    _add_common(s)
    s.set_defaults(func=cmd_spectrum)

    s = subs.add_parser("stability", help="threshold map over couplings or "
                        "pump strengths")
    _add_common(s)
    s.set_defaults(func=cmd_stability)

    s = subs.add_parser("optimize-angle", help="best local-oscillator angle "
                        "for one objective")
    _add_common(s)
    s.add_argument("--objective", choices=("squeezing", "duan", "epr"),
                   default=None, help="figure of merit (default from config)")
    s.add_argument("--omega", type=float, default=None,
                   help="frequency at which to optimize (default from config)")
    s.set_defaults(func=cmd_optimize_angle)

    s = subs.add_parser("verify", help="stochastic oracle vs linearized "
                        "spectra with z-scores")
    _add_common(s)
    s.add_argument("--negative-control", action="store_true",
                   help="corrupt the linearized drift (sign flip) to prove "
                        "the comparison can fail")
    s.set_defaults(func=cmd_verify)

    s = subs.add_parser("sde-dump", help="integrate and dump raw trajectories")
    _add_common(s, out_required=True)
    s.set_defaults(func=cmd_sde_dump)
    return parser


def _load(args) -> RunConfig:
    if args.config:
        cfg = load_config_file(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        cfg = RunConfig()
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        return args.func(args, cfg)
    except AboveThresholdError as exc:
        print(f"opodimer: above threshold: {exc}", file=sys.stderr)
        return 2
    except OpodimerError as exc:
        print(f"opodimer: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
