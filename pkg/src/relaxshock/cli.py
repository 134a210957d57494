"""Command-line interface: ``relaxshock <subcommand> [options]``.

Exit status is 0 when every gated check passes, 1 on a computational
failure (a JSON error object is written to standard error) and 2 on an
invalid configuration.
"""

import argparse
import copy
import csv
import json
import os
import sys

import numpy as np

from .errors import ConfigInvalid, RelaxShockError, _jsonable

SCHEMA = 1

DEFAULTS = {
    "model": {"name": "jin_xin", "a": 1.0, "flux": "burgers", "rho0": 1.0, "m0": 0.0,
              "frame_speed": None, "epsilon": None},
    "epsilon": 0.1,
    "epsilons": [0.05, 0.1, 0.2],
    "epsilon_max": 0.3,
    "delta": None,
    "eta": 0.0,
    "grid": {"L": 40.0, "h": None},
    "solver": {"tol": 1e-10, "max_iter": 50},
    "output": {"profile": None, "diagnostics": None},
}


# {{{ configuration

def _merge(base, override, path=""):
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigInvalid(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigInvalid(f"configuration key {where!r} must be an object")
            _merge(base[key], val, where + ".")
        else:
            base[key] = val
    return base


def load_config(path=None, text=None):
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read configuration: {exc}") from exc
    if text:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"configuration is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid("configuration must be a JSON object")
        _merge(cfg, data)
    if cfg["model"]["epsilon"] is not None:
        cfg["epsilon"] = cfg["model"]["epsilon"]
    _validate(cfg)
    return cfg


def _number(cfg, key, value, lo=None, hi=None, allow_none=False):
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(f"{key} must be a number")
    if lo is not None and value < lo or hi is not None and value > hi:
        raise ConfigInvalid(f"{key}={value} outside [{lo}, {hi}]")


def _validate(cfg):
    if cfg["model"]["name"] not in ("jin_xin", "broadwell"):
        raise ConfigInvalid(f"model.name {cfg['model']['name']!r} is not a built-in model")
    _number(cfg, "epsilon", cfg["epsilon"], 0.0)
    _number(cfg, "epsilon_max", cfg["epsilon_max"], 0.0)
    _number(cfg, "model.a", cfg["model"]["a"], 0.0)
    _number(cfg, "delta", cfg["delta"], 0.0, 1.0, allow_none=True)
    _number(cfg, "eta", cfg["eta"], 0.0)
    _number(cfg, "grid.L", cfg["grid"]["L"], 1e-9)
    _number(cfg, "grid.h", cfg["grid"]["h"], 1e-9, allow_none=True)
    _number(cfg, "solver.tol", cfg["solver"]["tol"], 1e-300)
    mi = cfg["solver"]["max_iter"]
    if isinstance(mi, bool) or not isinstance(mi, int) or mi < 1:
        raise ConfigInvalid("solver.max_iter must be a positive integer")
    eps = cfg["epsilons"]
    if not isinstance(eps, list) or not eps:
        raise ConfigInvalid("epsilons must be a nonempty list")
    for e in eps:
        _number(cfg, "epsilons[]", e, 0.0)
    if cfg["model"]["flux"] != "burgers":
        raise ConfigInvalid(f"unknown flux {cfg['model']['flux']!r}")


def _apply_flags(cfg, args):
    flags = {
        "epsilon": ("epsilon",), "delta": ("delta",), "eta": ("eta",),
        "tol": ("solver", "tol"), "max_iter": ("solver", "max_iter"),
        "grid_L": ("grid", "L"), "grid_h": ("grid", "h"),
        "out_profile": ("output", "profile"), "out_diag": ("output", "diagnostics"),
        "model": ("model", "name"),
    }
    for attr, keys in flags.items():
        val = getattr(args, attr, None)
        if val is None:
            continue
        d = cfg
        for k in keys[:-1]:
            d = d[k]
        d[keys[-1]] = val
    if getattr(args, "epsilons", None):
        try:
            cfg["epsilons"] = [float(s) for s in args.epsilons.split(",") if s.strip()]
        except ValueError as exc:
            raise ConfigInvalid(f"bad --epsilons list: {exc}") from exc
    _validate(cfg)
    return cfg

# }}}


# {{{ I/O

def write_profile_csv(path, x, U, n):
    m = U.shape[1]
    header = ["x"] + [f"u_{i + 1}" for i in range(n)] + [f"v_{i + 1}" for i in range(m - n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for xi, row in zip(x, U):
            w.writerow([f"{xi:.17g}"] + [f"{val:.17g}" for val in row])


def read_profile_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigInvalid(f"cannot read profile: {exc}") from exc
    if not rows or rows[0][0] != "x":
        raise ConfigInvalid("profile CSV must start with an 'x' column")
    header = rows[0]
    n = sum(1 for h in header if h.startswith("u_"))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return data[:, 0], data[:, 1:], n


def _dump(obj, path=None):
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")

# }}}


# {{{ subcommands

def _model(cfg):
    from .model import model_from_config

    return model_from_config(cfg["model"])


def _opts(cfg):
    from .solver import SolverOptions

    return SolverOptions(delta=cfg["delta"], tol=cfg["solver"]["tol"],
                         max_iter=cfg["solver"]["max_iter"], eta=cfg["eta"],
                         L=cfg["grid"]["L"], h=cfg["grid"]["h"])


def _profile(cfg, model, reduced):
    from .chapman_enskog import ns_profile
    from .model import hugoniot_endstates

    ends = hugoniot_endstates(reduced, model, cfg["epsilon"], eps_max=cfg["epsilon_max"])
    return ns_profile(reduced, model, ends, L=cfg["grid"]["L"], h=cfg["grid"]["h"])


def cmd_check(cfg, args):
    from .chapman_enskog import build_reduced
    from .structure import structure_report

    model = _model(cfg)
    rep = structure_report(model, build_reduced(model), epsilon=cfg["epsilon"] or None)
    _dump({"schema": SCHEMA, "model": model.name, **rep.to_json()}, cfg["output"]["diagnostics"])
    return 0 if rep.passed else 1


def cmd_reduce(cfg, args):
    from .chapman_enskog import build_reduced
    from .model import sample_neighborhood

    model = _model(cfg)
    red = build_reduced(model)
    pts = sample_neighborhood(model, 0.5 * cfg["epsilon_max"], args.samples)
    out = [{"u": u, "f_star": red.f_star(u), "b_star": red.b_star(u), "c_star": red.c_star(u)}
           for u in pts]
    _dump({"schema": SCHEMA, "model": model.name, "samples": out}, cfg["output"]["diagnostics"])
    return 0


def cmd_ns_profile(cfg, args):
    from .chapman_enskog import build_reduced, residual_Rv

    model = _model(cfg)
    red = build_reduced(model)
    prof = _profile(cfg, model, red)
    res = residual_Rv(model, prof)
    if cfg["output"]["profile"]:
        write_profile_csv(cfg["output"]["profile"], prof.x, prof.U, model.n)
    _dump({"schema": SCHEMA, "epsilon": prof.epsilon, "theta_fit": prof.theta_fit,
           "sup_Rv": res.sup, "lax_count": prof.lax_count}, cfg["output"]["diagnostics"])
    return 0


def _solve_diagnostics(model, prof, sol):
    from .solver import verify_theorem_bounds

    return {
        "schema": SCHEMA, "model": model.name, "epsilon": prof.epsilon,
        "delta": sol.delta, "iterations": sol.iterations, "ratios": sol.ratios,
        "increments": sol.increments, "norms": sol.norms,
        "nonlinear_residual": sol.residual, "bounds": verify_theorem_bounds(model, sol, prof),
        "phase": sol.info["phase"],
    }


def cmd_solve(cfg, args):
    from .chapman_enskog import build_reduced
    from .solver import fixed_point_solve

    model = _model(cfg)
    red = build_reduced(model)
    prof = _profile(cfg, model, red)
    sol = fixed_point_solve(model, red, prof, _opts(cfg))
    if cfg["output"]["profile"]:
        write_profile_csv(cfg["output"]["profile"], prof.x, sol.U_bar.values, model.n)
    _dump(_solve_diagnostics(model, prof, sol), cfg["output"]["diagnostics"])
    return 0


def _result_from_csv(cfg, model, red, path):
    from .solver import SolveResult, _profile_state, nonlinear_residual
    from .spaces import GridFunction

    x, U, n = read_profile_csv(path)
    if n != model.n:
        raise ConfigInvalid(f"profile has {n} fluid columns, model expects {model.n}")
    prof = _profile(cfg, model, red)
    if prof.x.size != x.size or np.max(np.abs(prof.x - x)) > 1e-12:
        raise ConfigInvalid("profile grid does not match the configured grid")
    Ub = GridFunction(x, U, prof.epsilon)
    from .linearized import default_delta
    delta = default_delta(prof) if cfg["delta"] is None else cfg["delta"]
    delta = min(delta, 1.0, 0.5 * prof.theta_fit / prof.epsilon)
    corr = Ub.with_values(U - _profile_state(prof))
    sol = SolveResult(corr, Ub, 0, [], [], {}, nonlinear_residual(model, Ub), delta)
    return prof, sol


def cmd_verify(cfg, args):
    from .chapman_enskog import build_reduced
    from .solver import verify_theorem_bounds

    model = _model(cfg)
    red = build_reduced(model)
    prof, sol = _result_from_csv(cfg, model, red, args.in_profile)
    out = {"schema": SCHEMA, "model": model.name, "epsilon": prof.epsilon,
           "nonlinear_residual": sol.residual,
           "bounds": verify_theorem_bounds(model, sol, prof)}
    status = 0
    if args.in_diag:
        with open(args.in_diag) as fh:
            rec = json.load(fh)
        worst = abs(rec["nonlinear_residual"] - out["nonlinear_residual"])
        scale = max(abs(rec["nonlinear_residual"]), 1e-300)
        rel = [worst / scale]
        for k, v in out["bounds"].items():
            rel.append(abs(rec["bounds"][k] - v) / max(abs(v), 1e-300))
        out["max_relative_deviation"] = max(rel)
        status = 0 if max(rel) <= 1e-9 else 1
    _dump(out, cfg["output"]["diagnostics"])
    return status


def cmd_spectrum(cfg, args):
    from .chapman_enskog import build_reduced
    from .solver import fixed_point_solve
    from .stability import assemble_L, profile_conditions, profile_prime, spectrum_check

    model = _model(cfg)
    red = build_reduced(model)
    if args.in_profile:
        prof, sol = _result_from_csv(cfg, model, red, args.in_profile)
    else:
        prof = _profile(cfg, model, red)
        sol = fixed_point_solve(model, red, prof, _opts(cfg))
    rep = spectrum_check(assemble_L(model, sol.U_bar), profile_prime(sol.U_bar), strict=False)
    out = {"schema": SCHEMA, "epsilon": prof.epsilon, **rep.to_json(),
           "profile_conditions": profile_conditions(sol.U_bar, prof.ends, model, red)}
    _dump(out, cfg["output"]["diagnostics"])
    from .stability import CORRELATION_MIN, STABLE_MARGIN, TRANSLATION_TOL
    ok = (abs(rep.translation) <= TRANSLATION_TOL and rep.correlation >= CORRELATION_MIN
          and rep.max_re_other <= -STABLE_MARGIN)
    return 0 if ok else 1


def cmd_sweep(cfg, args):
    from .solver import epsilon_sweep

    model = _model(cfg)
    table = epsilon_sweep(model, cfg["epsilons"], _opts(cfg))
    _dump({"schema": SCHEMA, "model": model.name, **table}, cfg["output"]["diagnostics"])
    return 0 if all(r["status"] == "ok" for r in table["rows"]) else 1

# }}}


COMMANDS = {
    "check": cmd_check, "reduce": cmd_reduce, "ns-profile": cmd_ns_profile,
    "solve": cmd_solve, "verify": cmd_verify, "spectrum": cmd_spectrum, "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid(message)


def build_parser():
    p = _Parser(prog="relaxshock", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--model", choices=["jin_xin", "broadwell"])
        s.add_argument("--epsilon", type=float)
        s.add_argument("--delta", type=float)
        s.add_argument("--eta", type=float)
        s.add_argument("--tol", type=float)
        s.add_argument("--max-iter", type=int)
        s.add_argument("--grid-L", dest="grid_L", type=float)
        s.add_argument("--grid-h", dest="grid_h", type=float)
        s.add_argument("--out-profile")
        s.add_argument("--out-diag")
        if name == "sweep":
            s.add_argument("--epsilons", help="comma-separated amplitudes")
        if name in ("verify", "spectrum"):
            s.add_argument("--in-profile", required=(name == "verify"))
        if name == "verify":
            s.add_argument("--in-diag", help="diagnostics JSON to compare against")
        if name == "reduce":
            s.add_argument("--samples", type=int, default=5)
    return p


def _limit_threads():
    cap = os.environ.get("RELAX_SHOCK_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def main(argv=None):
    _limit_threads()
    try:
        args = build_parser().parse_args(argv)
        cfg = _apply_flags(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except ConfigInvalid as exc:
        sys.stderr.write(json.dumps(exc.to_json()) + "\n")
        return 2
    except RelaxShockError as exc:
        sys.stderr.write(json.dumps(exc.to_json(), default=str) + "\n")
        return 1
    except (ValueError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
