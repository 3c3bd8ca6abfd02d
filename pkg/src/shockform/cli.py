"""Experiment runner: ``shockform run <config.json> [--out DIR] [--fields-only] [--seed N]``.

A run builds the system and the background wave, checks the certificates,
evolves every rung of the perturbation ladder, fits and validates the
preshock, optionally extracts the development boundary and the multi-dip
example, and writes a bundle of JSON and CSV files with a manifest.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
import traceback
from pathlib import Path

import numpy as np

from . import cusp, eikonal, mghd, preshock, simplewave, systems
from .errors import ConfigError, ShockformError

DEFAULTS = {
    "name": "experiment",
    "seed": 0,
    "system": {"name": "burgers_transport", "params": {}},
    "gauge": None,
    "wave": {
        "anchor": None,
        "curve_a": 1.0,
        "profile": {"width": 2.0, "shape": None, "center": 0.0, "skew": 0.0, "amplitude": 1.0},
        "normalize": True,
    },
    "certificates": {
        "mild": {"eta": 0.5, "delta1": 0.1, "delta2": 0.1},
        "strong": {"margin": 0.01},
    },
    "epsilons": [0.0],
    "perturbation": {"center": 0.0, "width": 1.0},
    "solver": {"n_u": 512, "dtau": 2e-3, "mu_stop": 1e-5, "tau_max": 1.5, "margin": None,
               "fd_order": 4, "checkpoints": [0.5]},
    "preshock": {"margin": 0.1, "width": 0.2, "r_max": 0.5},
    "cusp": {"d_min": 1e-3, "d_max": 0.1, "fit_shell": [0.05, 0.1], "min_points": 10},
    "mghd": None,
    "perverse": None,
    "checks": {
        "shock_time_tol": 1e-4,
        "shock_time_factor": 2.0,
        "a0_tol": 1e-3,
        "b0_tol": 1e-2,
        "cusp_relerr": 0.05,
        "c1_growth": 2.0,
        "gradient_growth": 10.0,
    },
}

MGHD_DEFAULTS = {
    "epsilon": 1e-3,
    "solver": {"n_u": 512, "dtau": 2e-3, "mu_stop": 1e-3, "margin": 1.5},
    "delta_box": 0.1,
    "causal": {"base": 0.85, "n_columns": 121, "n_levels": 201, "mu_zero_factor": 0.1},
    "oracle_points": 100,
    "oracle_box": None,
    "oracle_tol": 1e-6,
    "expect": "auto",
}

PERVERSE_DEFAULTS = {"n_max": 3, "n_u": 1024}


# ---------------------------------------------------------------- config

def _merge(base, over, path="config"):
    if over is None:
        return copy.deepcopy(base)
    if base is None or not isinstance(base, dict):
        return copy.deepcopy(over)
    if not isinstance(over, dict):
        raise ConfigError(f"{path}: expected an object")
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"{path}.{k}: unknown field")
        out[k] = _merge(base[k], v, f"{path}.{k}") if isinstance(base[k], dict) else copy.deepcopy(v)
    return out


def load_config(path) -> dict:
    """Parse and validate a JSON config, filling defaults.

    Raises
    ------
    ConfigError
        With the line/column of a JSON syntax error or the dotted path of the
        offending field.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    cfg = _merge(DEFAULTS, raw)
    if cfg["mghd"] is not None:
        cfg["mghd"] = _merge(MGHD_DEFAULTS, cfg["mghd"], "config.mghd")
    if cfg["perverse"] is not None:
        cfg["perverse"] = _merge(PERVERSE_DEFAULTS, cfg["perverse"], "config.perverse")
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    name = cfg["system"].get("name")
    if name not in systems.BUILTIN_NAMES:
        raise ConfigError(f"config.system.name: unknown system {name!r}; known: "
                          f"{', '.join(systems.BUILTIN_NAMES)}")
    eps = cfg["epsilons"]
    if not isinstance(eps, list) or not eps:
        raise ConfigError("config.epsilons: expected a non-empty list")
    for i, e in enumerate(eps):
        if not isinstance(e, (int, float)) or e < 0:
            raise ConfigError(f"config.epsilons[{i}]: must be a number >= 0")
    if cfg["wave"]["anchor"] is None:
        raise ConfigError("config.wave.anchor: required")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("config.seed: must be an integer")
    for key in ("n_u",):
        if not isinstance(cfg["solver"][key], int) or cfg["solver"][key] < 16:
            raise ConfigError(f"config.solver.{key}: must be an integer >= 16")
    g = cfg["gauge"]
    if g is not None and not set(g) <= {"t0", "x0", "v"}:
        raise ConfigError("config.gauge: fields are t0, x0, v")


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------- helpers

def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _dump(path, obj):
    path.write_text(json.dumps(_clean(obj), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _check(ok, value=None, threshold=None, note=None):
    d = {"pass": bool(ok), "value": value, "threshold": threshold}
    if note:
        d["note"] = note
    return d


def build_system(cfg):
    sc = cfg["system"]
    system = systems.builtin_system(sc["name"], sc.get("params") or {})
    if cfg["gauge"]:
        system = systems.galilean_transform(system, systems.GaugeParams(**cfg["gauge"]))
    return system


def build_wave(system, cfg):
    w = cfg["wave"]
    curve = simplewave.integrate_state_curve(system, w["anchor"], w["curve_a"])
    profile = simplewave.bump_profile(**w["profile"])
    return simplewave.build_simple_wave(system, curve, profile, normalize=w["normalize"])


def solver_config(d, **over) -> eikonal.SolverConfig:
    d = dict(d)
    d.update(over)
    d["checkpoints"] = tuple(d.get("checkpoints") or ())
    return eikonal.SolverConfig(**d)


def closed_form_modulation(wave):
    """``(a0, b0)`` of the unperturbed wave: ``-min rate`` and ``t* rate''/6``."""
    h = 1e-3
    f = wave.rate0(wave.argmin + h * np.arange(-2, 3))
    d2 = (-f[4] + 16 * f[3] - 30 * f[2] + 16 * f[1] - f[0]) / (12 * h * h)
    return -wave.min_rate, wave.t_star * d2 / 6.0


def certificates(system, wave, cfg) -> dict:
    out = {"spectral": {"pass": True, "note": "hyperbolicity, box and genuine nonlinearity "
                                              "checked on 100 box states"}}
    mild = cfg["certificates"]["mild"]
    try:
        c = simplewave.check_nondegeneracy(wave, "mild", **mild)
        out["mild"] = {"pass": True, **c.__dict__}
    except ShockformError as exc:
        out["mild"] = {"pass": False, "error": type(exc).__name__, "message": str(exc)}
    try:
        c = simplewave.check_nondegeneracy(wave, "strong", **cfg["certificates"]["strong"])
        out["strong"] = {"pass": True, **c.__dict__}
    except ShockformError as exc:
        out["strong"] = {"pass": False, "error": type(exc).__name__, "message": str(exc)}
    sup1, infn = systems.graphical_margin(system, wave.realized_states())
    out["graphical"] = {"pass": bool(sup1 < infn), "sup_lam_1": sup1, "inf_lam_N": infn}
    out["extremal"] = bool(system.is_extremal)
    return out


# ---------------------------------------------------------------- one ladder rung

def run_rung(system, wave, cfg, eps, k, out, fields_only):
    """Evolve one perturbation size and analyze it; never raises."""
    rep = {"epsilon": eps, "index": k, "files": []}
    try:
        scfg = solver_config(cfg["solver"])
        pert = eikonal.default_perturbation(system.n, **cfg["perturbation"])
        traj = eikonal.evolve_to_stop(eikonal.initialize(system, wave, pert, eps, scfg), scfg)
    except ShockformError as exc:
        rep["error"] = {"stage": "evolve", "type": type(exc).__name__, "message": str(exc)}
        return rep, None
    snaps = [0] + sorted(traj.checkpoints.values()) + [traj.tau.size - 1]
    for j in sorted(set(snaps)):
        s = traj.snapshot(j)
        name = f"snapshot_eps{k}_{j:05d}.csv"
        eikonal.write_snapshot_csv(out / name, s["tau"], traj.u, s["x"], s["mu"], s["Phi"],
                                   s["psi"], s["phi"])
        rep["files"].append(name)
    if fields_only:
        return rep, traj
    rep["stop_reason"] = traj.stop_reason
    rep["tau_stop"] = float(traj.tau[-1])
    name = f"min_mu_eps{k}.csv"
    with open(out / name, "w", encoding="utf-8") as fh:
        fh.write("tau,min_mu,argmin_u\n")
        for row in zip(traj.tau_hist, traj.min_hist, traj.argmin_hist):
            fh.write("{!r},{!r},{!r}\n".format(*map(float, row)))
    rep["files"].append(name)
    # regularity of the unknowns against the blowup of the physical gradient
    try:
        k_half = eikonal.snapshot_index(traj, traj.tau[0] + 0.5 * (traj.tau[-1] - traj.tau[0]))
        n0, n1 = eikonal.c1_norms(traj, k_half), eikonal.c1_norms(traj, traj.tau.size - 1)
        g0 = eikonal.max_shock_gradient(traj, k_half)
        g1 = eikonal.max_shock_gradient(traj, traj.tau.size - 1)
        rep["regularity"] = {"c1_mid": n0, "c1_stop": n1,
                             "c1_ratio": {q: n1[q] / n0[q] if n0[q] > 0 else 0.0 for q in n0},
                             "gradient_growth": g1 / g0}
    except (ShockformError, ValueError) as exc:
        rep["regularity"] = {"error": type(exc).__name__, "message": str(exc)}
    try:
        pc = cfg["preshock"]
        t_star, u0 = preshock.detect_preshock(traj, margin=pc["margin"])
        fit = preshock.fit_modulation(traj, t_star, u0, width=pc["width"], r_max=pc["r_max"])
        rep["fit"] = fit.to_dict()
        x_star, _ = preshock.preshock_state(traj, t_star, u0)
        lab = system.gauge.inverse(t_star, x_star)
        rep["preshock"] = {"t": t_star, "x": x_star, "u0": u0,
                           "t_lab": float(lab[0]), "x_lab": float(lab[1])}
        nsys, ntraj, model = preshock.gauge_normalize_at_preshock(system, traj, fit)
        cc = cfg["cusp"]
        shells = cusp.dyadic_shells(cc["d_min"], cc["d_max"])
        rep["leading"] = cusp.validate_leading_order(ntraj, model, nsys, shells,
                                                     min_points=cc["min_points"],
                                                     r_max=pc["r_max"]).to_dict()
        rep["correctors"] = cusp.fit_correctors(ntraj, model, fit_shell=tuple(cc["fit_shell"]),
                                                shells=shells, r_max=pc["r_max"]).to_dict()
        name = f"shells_eps{k}.csv"
        with open(out / name, "w", encoding="utf-8") as fh:
            fh.write("d_lo,d_hi,count,ratio_u,ratio_mu,psi_coeff,psi_coeff_relerr,corridor\n")
            for s in rep["leading"]["shells"]:
                fh.write(",".join(repr(float(s[c])) for c in (
                    "d_lo", "d_hi", "count", "ratio_u", "ratio_mu", "psi_coeff",
                    "psi_coeff_relerr", "corridor")) + "\n")
        rep["files"].append(name)
    except ShockformError as exc:
        rep["error"] = {"stage": "analysis", "type": type(exc).__name__, "message": str(exc)}
    return rep, traj


# ---------------------------------------------------------------- boundary stage

def run_mghd(system, wave, cfg, seed, out):
    mc = cfg["mghd"]
    rep = {"epsilon": mc["epsilon"]}
    t_box = wave.t_star + mc["delta_box"] + system.gauge.t0
    scfg = solver_config(mc["solver"], tau_max=wave.t_star + mc["delta_box"])
    pert = eikonal.default_perturbation(system.n, **cfg["perturbation"])
    traj = eikonal.evolve_to_stop(eikonal.initialize(system, wave, pert, mc["epsilon"], scfg),
                                  scfg, continuation=True, tau_end=t_box)
    causal = dict(mc["causal"])
    causal.setdefault("center", float(wave.argmin))
    causal["base"] = causal["base"] + system.gauge.t0
    if "tau_lo" in causal and causal["tau_lo"] is not None:
        causal["tau_lo"] = causal["tau_lo"] + system.gauge.t0
    cc = mghd.CausalConfig(lam_star=mghd.speed_spread(traj), t_box=t_box, **causal)
    rep["spacelike"] = mghd.check_spacelike(traj, cc)
    # two-characteristic value against the dense cone minimum
    rng = np.random.default_rng(seed)
    # times in the config are measured from the initial slice
    box = mc["oracle_box"] or [[causal["base"] - system.gauge.t0 + 0.02,
                                causal["base"] - system.gauge.t0 + 0.14],
                               [cc.center - 0.15, cc.center + 0.1]]
    tq = system.gauge.t0 + rng.uniform(box[0][0], box[0][1], mc["oracle_points"])
    uq = rng.uniform(box[1][0], box[1][1], mc["oracle_points"])
    ms = mghd.mu_star(traj, cc, tq, uq)
    loc, glob = mghd.mu_star_bruteforce(traj, cc, tq, uq)
    diff = float(np.max(np.abs(loc - ms.mu_star)))
    rep["oracle"] = {"points": int(tq.size), "max_abs_diff": diff,
                     "certified": int(ms.certified.sum()),
                     "max_dtau_mu": float(ms.max_dtau_mu.max()),
                     "lower_bound_excess": float(np.max(glob - ms.mu_star))}
    poly = mghd.classify_boundary(mghd.extract_boundary(traj, cc), traj, cc)
    poly.to_csv(out / "boundary.csv")
    counts = {c: int(np.sum((poly.classes == c) & ~poly.ambiguous)) for c in mghd.CLASSES}
    rep["boundary"] = {"counts": poly.counts(), "unambiguous_counts": counts,
                       "ambiguous": int(poly.ambiguous.sum()), "c_cone": poly.c_cone,
                       "witness_speed": poly.witness_speed, "lipschitz": poly.lipschitz,
                       "lipschitz_bound": 1.1 / poly.c_cone if poly.c_cone > 0 else None,
                       "ladder": poly.ladder, "certified_fraction": poly.certified_fraction}
    checks = {
        "mu_star_oracle": _check(diff <= mc["oracle_tol"] and ms.certified.all(), diff,
                                 mc["oracle_tol"]),
        "boundary_lipschitz": _check(mghd.lipschitz_ok(poly), poly.lipschitz,
                                     rep["boundary"]["lipschitz_bound"]),
    }
    expect = mc["expect"]
    if expect == "auto":
        expect = "extremal" if system.is_extremal else "intermediate"
    if expect == "extremal":
        ok = counts["preshock"] == 1 and counts["singular"] > 0 and counts["cauchy"] > 0
    elif expect == "intermediate":
        ok = counts["singular"] == 0 and counts["preshock"] == 1
    else:
        ok = counts["extensible"] == poly.u.size
    checks["boundary_classes"] = _check(ok, counts, expect)
    return rep, checks


# ---------------------------------------------------------------- pipeline

def run(cfg, out: Path, seed=None, fields_only=False) -> int:
    """Execute a parsed config into ``out``; returns the process exit code."""
    seed = cfg["seed"] if seed is None else int(seed)
    out.mkdir(parents=True, exist_ok=True)
    system = build_system(cfg)
    wave = build_wave(system, cfg)
    files = []
    checks = {}
    runs = []
    trajs = []
    for k, eps in enumerate(cfg["epsilons"]):
        rep, traj = run_rung(system, wave, cfg, float(eps), k, out, fields_only)
        runs.append(rep)
        trajs.append(traj)
        files += rep["files"]
    if fields_only:
        return 0 if all("error" not in r for r in runs) else 1

    certs = certificates(system, wave, cfg)
    _dump(out / "certificates.json", certs)
    files.append("certificates.json")
    checks["certificates"] = _check(certs["mild"]["pass"] and certs["strong"]["pass"]
                                    and certs["graphical"]["pass"])
    for rep in runs:
        name = f"run_eps{rep['index']}.json"
        _dump(out / name, rep)
        files.append(name)
        checks[f"run_eps{rep['index']}"] = _check("error" not in rep, note=(rep.get("error") or {}).get("type"))

    ck = cfg["checks"]
    exact_t = wave.t_star + system.gauge.t0
    ok_runs = [r for r in runs if "fit" in r]
    zero = [r for r in ok_runs if r["epsilon"] == 0.0]
    if zero:
        r0 = zero[0]
        err = abs(r0["fit"]["t_star"] - exact_t)
        checks["shock_time"] = _check(err <= ck["shock_time_tol"], err, ck["shock_time_tol"])
        a0, b0 = closed_form_modulation(wave)
        ea, eb = abs(r0["fit"]["a0"] - a0), abs(r0["fit"]["b0"] - b0)
        checks["modulation"] = _check(ea <= ck["a0_tol"] and eb <= ck["b0_tol"],
                                      {"a0": r0["fit"]["a0"], "b0": r0["fit"]["b0"],
                                       "a0_exact": a0, "b0_exact": b0},
                                      {"a0": ck["a0_tol"], "b0": ck["b0_tol"]})
        fit_report = {"t_star": r0["fit"]["t_star"], "u0": r0["fit"]["u0"],
                      "a0": r0["fit"]["a0"], "b0": r0["fit"]["b0"]}
        if "leading" in r0:
            fit_report["shells"] = [{q: s[q] for q in ("d_lo", "d_hi", "ratio_u", "ratio_mu",
                                                       "psi_coeff_relerr")}
                                    for s in r0["leading"]["shells"]]
            fit_report["correctors"] = r0.get("correctors")
        _dump(out / "fit_report.json", fit_report)
        files.append("fit_report.json")
    pos = [r for r in ok_runs if r["epsilon"] > 0]
    if len(pos) >= 2:
        cs = [abs(r["fit"]["t_star"] - exact_t) / r["epsilon"] for r in pos]
        spread = max(cs) / max(min(cs), 1e-300)
        checks["shock_time_linear"] = _check(spread <= ck["shock_time_factor"], cs,
                                             ck["shock_time_factor"])
    for r in ok_runs:
        if "leading" in r:
            lead = r["leading"]
            checks[f"cusp_eps{r['index']}"] = _check(
                lead["bounded"] and lead["finest_relerr"] <= ck["cusp_relerr"],
                {"bounded": lead["bounded"], "finest_relerr": lead["finest_relerr"]},
                ck["cusp_relerr"])
        reg = r.get("regularity", {})
        if "c1_ratio" in reg:
            worst = max(reg["c1_ratio"].values())
            checks[f"regularity_eps{r['index']}"] = _check(
                worst <= ck["c1_growth"] and reg["gradient_growth"] >= ck["gradient_growth"],
                {"c1_ratio_max": worst, "gradient_growth": reg["gradient_growth"]},
                {"c1": ck["c1_growth"], "growth": ck["gradient_growth"]})

    if cfg["mghd"] is not None:
        try:
            rep, mchecks = run_mghd(system, wave, cfg, seed, out)
            checks.update(mchecks)
            files.append("boundary.csv")
        except ShockformError as exc:
            rep = {"error": {"type": type(exc).__name__, "message": str(exc)}}
            checks["mghd"] = _check(False, note=type(exc).__name__)
        _dump(out / "mghd.json", rep)
        files.append("mghd.json")
    if cfg["perverse"] is not None:
        pv = mghd.perverse_harness(**cfg["perverse"])
        _dump(out / "perverse.json", pv)
        files.append("perverse.json")
        checks["perverse"] = _check(pv["locations_ok"] and pv["angles_ok"],
                                    {"min_angle": pv["min_angle"]}, {"angle": [np.pi / 2, 0.05]})

    _dump(out / "config.json", cfg)
    files.append("config.json")
    manifest = {
        "name": cfg["name"],
        "config_sha256": config_hash(cfg),
        "seed": seed,
        "files": {f: hashlib.sha256((out / f).read_bytes()).hexdigest() for f in sorted(set(files))},
        "checks": checks,
        "all_pass": all(c["pass"] for c in checks.values()),
    }
    _dump(out / "manifest.json", manifest)
    return 0 if manifest["all_pass"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="shockform")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (default: ./out/<name>)")
    p.add_argument("--fields-only", action="store_true", help="write snapshot CSVs only")
    p.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else Path("out") / cfg["name"]
    try:
        return run(cfg, out, seed=args.seed, fields_only=args.fields_only)
    except ShockformError as exc:
        traceback.print_exc()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
