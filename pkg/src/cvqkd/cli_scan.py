"""Command-line front end: point rates, sweeps, thresholds and validation runs.

Every command reads parameters from (highest precedence first) command-line
flags, an optional JSON config file and built-in defaults.  Sweeps write CSV
with a fixed header per command; failed points keep their row with empty
value cells and a status message.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Sequence

import numpy as np

from . import composable as cmp
from . import estimation as est
from . import fading as fad
from . import fock_discrete as fk
from . import mdi_protocols as mdi
from . import montecarlo as mc
from . import oneway_protocols as ow
from ._optim import maximize_log

SCHEMA = 1
EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

# name -> (type, default, help)
PARAMS: dict[str, tuple[type, Any, str]] = {
    "protocol": (str, "oneway", "oneway | mdi | star | discrete"),
    "detection": (str, "hom", "hom | het (one-way)"),
    "direction": (str, "rr", "dr | rr"),
    "tau": (float, 0.5, "transmissivity (one-way, star, discrete; tau_min for fading)"),
    "omega": (float, 1.0, "thermal variance of Eve's ancilla"),
    "eps": (float, None, "input-referred excess noise; overrides omega / nbar"),
    "vm": (float, 10.0, "modulation variance V_M"),
    "vth": (float, 0.0, "trusted preparation noise V_th"),
    "xi": (float, 1.0, "reconciliation efficiency"),
    "mu": (float, None, "mu = V_M + 1 (MDI, star); defaults to vm + 1"),
    "tau_a": (float, 0.98, "Alice-relay transmissivity"),
    "tau_b": (float, 0.5, "Bob-relay transmissivity"),
    "eps_a": (float, 0.0, "excess noise on Alice's link"),
    "eps_b": (float, 0.0, "excess noise on Bob's link"),
    "states": (int, 4, "constellation size N (discrete)"),
    "z": (float, 0.1, "constellation radius (discrete)"),
    "nbar": (float, 0.0, "Eve's thermal photons (discrete)"),
    "n_max": (int, 12, "Fock cutoff per mode (discrete)"),
    "block": (float, 1e9, "total block size N (finite)"),
    "r": (float, 0.5, "parameter-estimation ratio m/N (finite)"),
    "eps_pe": (float, 1e-10, "parameter-estimation error"),
    "n": (float, 1e8, "block size (composable)"),
    "xi_a": (float, 0.0, "excess noise xi_A (composable)"),
    "xi_b": (float, 0.01, "excess noise xi_B (composable)"),
    "k": (float, 0.0, "energy-test signals (composable)"),
    "K": (float, None, "de Finetti parameter K; defaults to n"),
    "dtau": (float, 0.1, "fading width (fading)"),
    "nodes": (int, None, "quadrature nodes per axis (fading)"),
    "f": (float, 1e9, "frequency in Hz (threshold --mode frequency)"),
    "T": (float, 300.0, "temperature in K"),
    "seed": (int, 1, "RNG seed"),
    "trials": (int, 20000, "Monte Carlo trials (validate)"),
    "m": (float, 1e5, "samples per block (validate)"),
}
OPTIMIZABLE = ("vm", "mu", "r", "z", "k")
VM_BOUNDS = (1e-2, 1e6)
MU_BOUNDS = (1.01, 1e6)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    steps: int
    scale: str = "linear"

    def __post_init__(self):
        if self.steps < 2:
            raise UsageError("a sweep needs at least 2 steps")
        if self.scale not in ("linear", "db", "log"):
            raise UsageError(f"unknown scale {self.scale!r}")
        if self.name not in PARAMS:
            raise UsageError(f"cannot sweep unknown parameter {self.name!r}")
        if self.scale == "log" and min(self.start, self.stop) <= 0:
            raise UsageError("log axis needs positive bounds")

    @property
    def column(self) -> str:
        return f"{self.name}_db" if self.scale == "db" else self.name

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)

    def apply(self, v: float) -> float:
        # dB axes feed transmissivities: tau = 10^(-dB/10)
        return 10.0 ** (-v / 10.0) if self.scale == "db" else float(v)


@dataclass
class SweepConfig:
    command: str
    params: dict
    axis: Axis | None = None
    optimize: tuple[str, ...] = ()
    out: str | None = None
    mode: str = "eps"


def _load_json(path: str | None, command: str) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    flat = {k: v for k, v in data.items() if k != "commands"}
    flat.update(data.get("commands", {}).get(command, {}))
    return flat


def build_config(ns: argparse.Namespace) -> SweepConfig:
    file_cfg = _load_json(ns.config, ns.command)
    params = {k: spec[1] for k, spec in PARAMS.items()}
    for k, v in file_cfg.items():
        if k in PARAMS:
            params[k] = None if v is None else PARAMS[k][0](v)
        elif k not in ("axis", "scale", "optimize", "out", "mode"):
            raise UsageError(f"unknown config key {k!r}")
    for k in PARAMS:
        v = getattr(ns, k, None)
        if v is not None:
            params[k] = v
    axis_spec = ns.axis if getattr(ns, "axis", None) else file_cfg.get("axis")
    scale = getattr(ns, "scale", None) or file_cfg.get("scale", "linear")
    axis = None
    if axis_spec:
        try:
            name, a, b, steps = axis_spec
            axis = Axis(str(name), float(a), float(b), int(steps), str(scale).lower())
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad axis {axis_spec!r}: {exc}") from exc
    opt = getattr(ns, "opt", None) or file_cfg.get("optimize", "")
    if isinstance(opt, str):
        opt = [o for o in opt.split(",") if o]
    bad = set(opt) - set(OPTIMIZABLE)
    if bad:
        raise UsageError(f"cannot optimize {sorted(bad)}; choose from {OPTIMIZABLE}")
    out = getattr(ns, "out", None) or file_cfg.get("out")
    mode = getattr(ns, "mode", None) or file_cfg.get("mode", "eps")
    return SweepConfig(ns.command, params, axis, tuple(opt), out, mode)


# ---------------------------------------------------------------- point evaluators

def _channel(p: dict) -> ow.LossyChannel:
    if p["eps"] is not None:
        return ow.LossyChannel.from_excess_noise(p["tau"], p["eps"])
    return ow.LossyChannel(p["tau"], p["omega"])


def _spec(p: dict) -> ow.OneWaySpec:
    return ow.OneWaySpec(p["detection"], p["direction"], p["vm"], p["vth"], p["xi"])


def _mu(p: dict) -> float:
    return p["mu"] if p["mu"] is not None else p["vm"] + 1.0


def _attack(p: dict) -> mdi.MdiAttack:
    return mdi.attack_from_excess(p["tau_a"], p["tau_b"], p["eps_a"], p["eps_b"])


def _discrete_nbar(p: dict) -> float:
    return fk.nbar_from_excess(p["tau"], p["eps"]) if p["eps"] is not None else p["nbar"]


def rate_point(p: dict, opt: tuple[str, ...]) -> dict:
    proto = p["protocol"]
    if proto == "oneway":
        ch = _channel(p)
        if "vm" in opt:
            vm, _ = maximize_log(lambda v: ow.keyrate_oneway(replace(_spec(p), V_M=v), ch).rate,
                                 *VM_BOUNDS)
            p = dict(p, vm=vm)
        b = ow.keyrate_oneway(_spec(p), ch)
        return {"rate": b.clamped, "raw_rate": b.rate, "i_ab": b.i_ab, "i_e": b.i_e,
                "vm": p["vm"], "spectra": b.as_dict()["spectra"]}
    if proto == "mdi":
        at = _attack(p)
        mu = _mu(p)
        if "mu" in opt or "vm" in opt:
            mu, _ = mdi.keyrate_mdi_optimized(p["xi"], at)
        b = mdi.keyrate_mdi(p["xi"], mu, at)
        return {"rate": b.clamped, "raw_rate": b.rate, "i_ab": b.i_ab, "i_e": b.i_e,
                "mu": mu, "spectra": b.as_dict()["spectra"]}
    if proto == "star":
        omega = _channel(p).omega
        mu = _mu(p)
        if "mu" in opt or "vm" in opt:
            mu, _ = mdi.keyrate_star3_optimized(p["xi"], omega, p["tau"])
        b = mdi.keyrate_star3(p["xi"], mu, omega, p["tau"])
        return {"rate": b.clamped, "raw_rate": b.rate, "i_ab": b.i_ab, "i_e": b.i_e, "mu": mu}
    if proto == "discrete":
        return discrete_point(p, opt)
    raise UsageError(f"unknown protocol {proto!r}")


def discrete_point(p: dict, opt: tuple[str, ...]) -> dict:
    nbar = _discrete_nbar(p)
    key = "R_rr" if p["direction"] in ("rr", "reverse") else "R_dr"

    def run(z):
        c = fk.Constellation(p["states"], z)
        if nbar == 0.0:
            return fk.pureloss_rates(c, p["tau"])
        return fk.thermal_rates(c, p["tau"], nbar, n_max=p["n_max"],
                                reverse=(key == "R_rr"))
    z = p["z"]
    if "z" in opt:
        z, _ = fk.optimize_radius(lambda x: getattr(run(x), key))
    res = run(z)
    raw = getattr(res, key)
    return {"rate": max(raw, 0.0), "raw_rate": raw, "i_ab": res.i_ab,
            "i_e": res.chi_rr if key == "R_rr" else res.chi_dr,
            "R_opt": res.R_opt, "z": z, "nbar": nbar}


def finite_point(p: dict, opt: tuple[str, ...]) -> dict:
    N = p["block"]
    if p["protocol"] == "oneway":
        spec, ch = _spec(p), _channel(p)

        def asym(V_M):
            return ow.keyrate_oneway(replace(spec, V_M=V_M), ch).rate

        def fn(V_M, r):
            try:
                return est.keyrate_finite_oneway(replace(spec, V_M=V_M), ch, N, r,
                                                 eps_PE=p["eps_pe"]).raw
            except ValueError:
                return -np.inf
    elif p["protocol"] == "mdi":
        at = _attack(p)

        def asym(V_M):
            return mdi.keyrate_mdi(p["xi"], V_M + 1.0, at).rate

        def fn(V_M, r):
            try:
                return est.keyrate_finite_mdi(p["xi"], V_M + 1.0, at, N, r,
                                              eps_PE=p["eps_pe"]).raw
            except ValueError:
                return -np.inf
    else:
        raise UsageError("finite supports oneway and mdi")
    over = tuple(o for o in ("V_M", "r") if {"V_M": "vm", "r": "r"}[o] in opt
                 or (o == "V_M" and "mu" in opt))
    vm = p["vm"] if p["protocol"] == "oneway" else _mu(p) - 1.0
    if over:
        fixed = {"V_M": vm, "r": p["r"]}
        params, raw = est.optimize_finite(
            lambda **kw: fn(**{**fixed, **kw}), over)
        vm, r = params.get("V_M", vm), params.get("r", p["r"])
    else:
        r = p["r"]
        raw = fn(vm, r)
    # asymptotic rate at the same modulation, so rate <= asymptotic pointwise
    return {"rate": max(raw, 0.0), "raw_rate": raw, "asymptotic": asym(vm), "vm": vm, "r": r}


def composable_point(p: dict, opt: tuple[str, ...]) -> dict:
    n = p["n"]
    K = p["K"] if p["K"] is not None else n
    prm = cmp.CloneParams(p["tau_a"], p["tau_b"], p["xi_a"], p["xi_b"], p["xi"])
    budget = cmp.EpsilonBudget.for_target(K)
    if "vm" in opt:
        vm_col, col = cmp.optimize_collective(n, prm, budget)
        best, coh = cmp.optimize_coherent(n, prm, budget, K, k_min=p["k"])
        vm_coh, k = best["V_M"], best["k"]
    else:
        vm_col = vm_coh = p["vm"]
        k = p["k"]
        col = cmp.keyrate_composable_collective(n, budget, prm, vm_col).raw
        coh = cmp.keyrate_composable_coherent(n, k, K, budget, prm, vm_coh).raw
    asym_at = cmp.rate_from_cm(*_t0_cm(prm, vm_col), prm.xi, vm_col)
    return {"rate": max(col, 0.0), "raw_rate": col, "coherent": max(coh, 0.0),
            "coherent_raw": coh, "asymptotic": asym_at.raw, "vm": vm_col, "vm_coherent": vm_coh,
            "k": k, "eps_coherent": budget.eps_coherent(K)}


def _t0_cm(prm: cmp.CloneParams, vm: float):
    wc = cmp.worst_case_cm_analytic(prm.tau_A, prm.tau_B, prm.xi_A, prm.xi_B, vm, math.inf, 0.5)
    return wc.x_max, wc.y_max, wc.z_min


def fading_point(p: dict, opt: tuple[str, ...]) -> dict:
    fade = fad.UniformFade(p["tau"], p["dtau"])
    proto = p["protocol"]
    kw = {} if p["nodes"] is None else {"nodes": p["nodes"]}
    omega = p["omega"]
    if proto == "oneway":
        spec = _spec(p)
        fast = fad.keyrate_fast_oneway(fade, spec, omega, **kw)
        slow = fad.keyrate_slow_oneway(fade, spec, omega, **kw)
    elif proto == "mdi":
        fast = fad.keyrate_fast_mdi(fade, p["xi"], _mu(p), omega, **kw)
        slow = fad.keyrate_slow_mdi(fade, p["xi"], _mu(p), omega, **kw)
    elif proto == "star":
        mu = None if ("mu" in opt or "vm" in opt) else _mu(p)
        fast = fad.keyrate_fast_star(fade, p["xi"], mu, omega, **kw)
        slow = fad.keyrate_slow_star(fade, p["xi"], mu, omega, **kw)
    else:
        raise UsageError("fading supports oneway, mdi and star")
    return {"rate": fast.clamped, "raw_rate": fast.rate, "i_ab": fast.i_ab, "i_e": fast.i_e,
            "slow": slow.clamped, "slow_raw": slow.rate, "mean_rate": fast.mean_rate,
            "fixed_rate": fast.fixed}


def threshold_point(p: dict, opt: tuple[str, ...], mode: str = "eps") -> dict:
    if mode == "frequency":
        return frequency_threshold(p)
    if p["protocol"] == "discrete":
        res = fk.threshold_discrete(p["states"], p["z"], p["tau"], n_max=p["n_max"])
        return {"eps_max": res.eps, "bracketed": res.bracketed, "residual": res.residual}
    if p["protocol"] != "oneway":
        raise UsageError("threshold supports oneway and discrete")
    res = ow.security_threshold(_spec(p), p["tau"])
    return {"eps_max": res.eps, "bracketed": res.bracketed, "residual": res.residual}


def frequency_threshold(p: dict, tol: float = 1e-7) -> dict:
    """Smallest transmissivity with a positive rate when omega = V_th + 1, V_th = 2 nbar(f)."""
    vth = 2.0 * ow.thermal_photons_from_frequency(p["f"], p["T"])
    spec = replace(_spec(p), V_th=vth)
    omega = vth + 1.0
    finite = p.get("finite", False)

    def rate(tau):
        ch = ow.LossyChannel(tau, omega)
        if finite:
            try:
                return est.keyrate_finite_oneway(spec, ch, p["block"], p["r"],
                                                 eps_PE=p["eps_pe"]).raw
            except ValueError:
                return -np.inf
        return ow.keyrate_oneway(spec, ch).rate

    # bisect in u = -log10(1 - tau) so that tau -> 1 is resolved
    lo, hi = 1e-4, 12.0
    if rate(1.0 - 10.0 ** -hi) <= 0.0:
        return {"tau_min": 1.0, "bracketed": False, "vth": vth}
    if rate(1.0 - 10.0 ** -lo) > 0.0:
        return {"tau_min": 1.0 - 10.0 ** -lo, "bracketed": False, "vth": vth}
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rate(1.0 - 10.0 ** -mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return {"tau_min": 1.0 - 10.0 ** -hi, "bracketed": True, "vth": vth}


# fixed output columns per command (after the axis column)
COLUMNS = {
    "rate": ["rate", "raw_rate", "i_ab", "i_e"],
    "scan": ["rate", "raw_rate", "i_ab", "i_e"],
    "finite": ["rate", "raw_rate", "asymptotic", "vm", "r"],
    "composable": ["rate", "raw_rate", "coherent", "coherent_raw", "asymptotic", "vm", "k"],
    "fading": ["rate", "raw_rate", "slow", "slow_raw", "mean_rate", "fixed_rate"],
    "discrete": ["rate", "raw_rate", "i_ab", "i_e", "R_opt", "z"],
    "threshold": ["eps_max", "bracketed"],
    "threshold-frequency": ["tau_min", "bracketed", "vth"],
}
EVALUATORS: dict[str, Callable[..., dict]] = {
    "rate": rate_point, "scan": rate_point, "finite": finite_point,
    "composable": composable_point, "fading": fading_point, "discrete": discrete_point,
}


def _opt_columns(cmd: str, opt: tuple[str, ...]) -> list[str]:
    base = COLUMNS[cmd]
    extra = {"vm": "vm", "mu": "mu", "z": "z", "r": "r", "k": "k"}
    return [extra[o] for o in opt if extra[o] not in base]


def _evaluate(args) -> tuple[dict | None, str]:
    cmd, p, opt, mode = args
    try:
        if cmd == "threshold":
            out = threshold_point(p, opt, mode)
        else:
            out = EVALUATORS[cmd](p, opt)
        return out, "ok"
    except UsageError:
        raise
    except Exception as exc:  # noqa: BLE001 - recorded per point, scan continues
        msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        return None, msg


def workers() -> int:
    raw = os.environ.get("CVQKD_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"CVQKD_THREADS must be an integer, got {raw!r}") from None


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def run_sweep(cfg: SweepConfig) -> str:
    axis = cfg.axis
    assert axis is not None
    col_key = "threshold-frequency" if (cfg.command == "threshold" and cfg.mode == "frequency") \
        else cfg.command
    cols = COLUMNS[col_key] + _opt_columns(col_key, cfg.optimize)
    xs = axis.values()
    jobs = [(cfg.command, {**cfg.params, axis.name: axis.apply(x)}, cfg.optimize, cfg.mode)
            for x in xs]
    n_workers = workers()
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_evaluate, jobs))
    else:
        results = [_evaluate(j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema", axis.column] + cols + ["status"])
    for x, (row, status) in zip(xs, results):
        vals = [row.get(c) if row else None for c in cols]
        w.writerow([SCHEMA, _fmt(x)] + [_fmt(v) for v in vals] + [status])
    return buf.getvalue()


# ---------------------------------------------------------------- validation

def run_validate(p: dict) -> dict:
    seed, trials, m = p["seed"], p["trials"], int(p["m"])
    tol = 0.05
    checks = []

    def add(name, measured, analytic):
        ratio = measured / analytic
        checks.append({"name": name, "measured": float(measured), "analytic": float(analytic),
                       "ratio": float(ratio), "pass": bool(abs(ratio - 1.0) < tol)})

    for vth in (0.0, 1.0, 10.0):
        s = mc.estimator_study_oneway(0.5, 1.2, 10.0, vth, m, trials, seed, exact=True)
        tag = "oneway" if vth == 0 else f"thermal_vth{vth:g}"
        add(f"{tag}_var_tau", s["var_tau"], s["var_tau_analytic"])
        add(f"{tag}_var_V_eps", s["var_V_eps"], s["var_V_eps_analytic"])
    at = mdi.attack_from_excess(0.9, 0.7, 0.01, 0.01)
    s = mc.estimator_study_mdi(at, 10.0, m, trials, seed, exact=True)
    for i, name in enumerate(("tau_A", "tau_B", "V_Q", "V_P")):
        add(f"mdi_var_{name}", s["var"][i], s["var_analytic"][i])
    eps_cov = 0.05
    cov = mc.coverage_test({"tau": 0.5, "omega": 1.2, "V_M": 10.0, "V_th": 0.0, "m": 10000},
                           eps_cov, 1000, seed)
    # binomial 3-sigma allowance on the nominal failure rate
    limit = eps_cov + 3.0 * math.sqrt(eps_cov * (1 - eps_cov) / cov.trials)
    checks.append({"name": "coverage", "measured": cov.miss_rate, "analytic": eps_cov,
                   "ratio": cov.miss_rate / eps_cov, "pass": bool(cov.miss_rate <= limit)})
    return {"rng": mc.RNG_NAME, "seed": seed, "trials": trials, "m": m, "tolerance": tol,
            "checks": checks, "passed": all(c["pass"] for c in checks)}


# ---------------------------------------------------------------- argument parsing

def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    for name, (typ, _, help_) in PARAMS.items():
        flag = "--" + name.replace("_", "-")
        g.add_argument(flag, dest=name, type=typ, default=None, help=help_)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cvqkd", description="CV-QKD key-rate calculator")
    ap.add_argument("--config", help="JSON config file (flags override it)")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "rate": "single-point key rate as JSON",
        "scan": "sweep one parameter, CSV output",
        "threshold": "security thresholds, CSV output",
        "finite": "finite-size key rates",
        "composable": "composable key rates",
        "fading": "fast and slow fading rates",
        "discrete": "phase-encoded constellation rates",
        "validate": "Monte Carlo checks of the estimators",
    }
    for name, h in helps.items():
        sp = sub.add_parser(name, help=h)
        sp.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
        _add_params(sp)
        if name != "validate":
            sp.add_argument("--axis", nargs=4, metavar=("NAME", "FROM", "TO", "STEPS"))
            sp.add_argument("--scale", choices=("linear", "db", "log"))
            sp.add_argument("--opt", help="comma list from " + ",".join(OPTIMIZABLE))
            sp.add_argument("--out", help="output file (default stdout)")
        if name == "threshold":
            sp.add_argument("--mode", choices=("eps", "frequency"))
            sp.add_argument("--finite", action="store_true", default=None,
                            help="frequency mode: use the finite-size rate at --block")
    return ap


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def main(argv: Sequence[str] | None = None) -> int:
    ap = make_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if not hasattr(ns, "config"):
        ns.config = None
    try:
        cfg = build_config(ns)
        if getattr(ns, "finite", None):
            cfg.params["finite"] = True
        if cfg.command == "validate":
            report = run_validate(cfg.params)
            print(json.dumps(_jsonable(report), indent=2))
            return EXIT_OK if report["passed"] else EXIT_CHECK
        if cfg.command == "scan" and cfg.axis is None:
            raise UsageError("scan needs --axis NAME FROM TO STEPS")
        if cfg.axis is not None:
            _emit(run_sweep(cfg), cfg.out)
            return EXIT_OK
        row, status = _evaluate((cfg.command, cfg.params, cfg.optimize, cfg.mode))
        if row is None:
            print(f"cvqkd: error: {status}", file=sys.stderr)
            return EXIT_USAGE
        row = {**row, "status": status, "params": cfg.params}
        _emit(json.dumps(_jsonable(row), indent=2) + "\n", cfg.out)
        return EXIT_OK
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"cvqkd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
