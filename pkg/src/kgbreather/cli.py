"""Command-line front end.

Five subcommands cover the workflow: ``groundstate`` (continuum profile),
``breather`` (assemble and save one breather), ``scaling`` (mu sweep with
log-log slopes), ``validate`` (recheck a saved breather, optionally by
direct integration), ``fem-check`` (lattice-vs-continuum functional gap).

Every option can also come from a key=value config file (``--config``);
explicit flags win over the file, the file wins over built-in defaults.

Exit codes: 0 success, 2 guard/resonance violations (bad parameters or
physics outside the validated regime), 3 iteration failures, 4 malformed
files.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .breather import (
    PipelineConfig,
    assemble_breather,
    error_vs_reference,
    kg_residual,
    load_breather,
    save_breather,
    save_breather_report,
    scaling_study,
)
from .dynamics import integrate_period
from .errors import (
    ConvergenceError,
    FormatError,
    GuardError,
    KGBreatherError,
    ResonanceError,
)
from .feminterp import FemInterpolant, functional_remainder
from .groundstate import sample_reference, save_profile, solve_ground_state
from .lattice import GridSpec, norm_q_mu
from .timespectral import sobolev_time_norm

# option name -> (type, default); None default means "required"
_SCHEMAS = {
    "groundstate": {
        "n": (int, None),
        "p": (float, None),
        "tol": (float, 1e-11),
        "out": (str, "groundstate"),
    },
    "breather": {
        "n": (int, None),
        "p": (float, None),
        "a": (float, None),
        "mu": (float, None),
        "mode": (str, "st"),
        "K": (int, 0),  # 0: derive from r_min
        "l_max": (int, 15),
        "r_min": (float, 80.0),
        "tol": (float, 1e-12),
        "kernel_tol": (float, 1e-11),
        "residual_l_max": (int, 0),
        "out": (str, "breather"),
    },
    "scaling": {
        "n": (int, None),
        "p": (float, None),
        "a": (float, None),
        "mode": (str, "st"),
        "mu_list": (str, None),
        "l_max": (int, 15),
        "r_min": (float, 80.0),
        "residual_l_max": (int, 0),
        "out": (str, "scaling"),
    },
    "validate": {
        "input": (str, None),
        "integrate": (bool, False),
        "steps": (int, 2048),
        "periods": (int, 1),
        "out": (str, ""),
    },
    "fem-check": {
        "n": (int, None),
        "p": (float, None),
        "mu_list": (str, "0.2,0.15,0.1,0.075,0.05"),
        "r_min": (float, 45.0),
        "out": (str, ""),
    },
}


def _parse_config_file(path):
    values = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise FormatError(
                        f"{path}:{lineno}: expected key=value, got {line!r}"
                    )
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise FormatError(f"cannot read config file {path}: {exc}") from exc
    return values


def _coerce(raw, typ, key):
    if typ is bool:
        if isinstance(raw, bool):
            return raw
        lowered = str(raw).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise FormatError(f"option {key}: cannot read {raw!r} as a flag")
    try:
        return typ(raw)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"option {key}: cannot read {raw!r} as {typ.__name__}") from exc


def _merge(args, command):
    """flags > config file > defaults; required keys must land somewhere."""
    schema = _SCHEMAS[command]
    file_values = _parse_config_file(args.config) if args.config else {}
    merged = {}
    for key, (typ, default) in schema.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
        elif key in file_values:
            merged[key] = _coerce(file_values[key], typ, key)
        elif default is not None:
            merged[key] = default
        else:
            raise GuardError(f"{command}: missing required option --{key.replace('_', '-')}")
    return merged


def _parse_mu_list(text):
    try:
        mus = [float(tok) for tok in str(text).replace(";", ",").split(",") if tok]
    except ValueError as exc:
        raise FormatError(f"cannot parse mu list {text!r}") from exc
    if not mus:
        raise FormatError(f"empty mu list {text!r}")
    return mus


def _cmd_groundstate(opt):
    profile = solve_ground_state(opt["n"], opt["p"], tol=opt["tol"])
    path = f"{opt['out']}.csv"
    save_profile(path, profile)
    print(
        f"ground state n={opt['n']} p={opt['p']}: "
        f"multiplier={float(profile.multiplier)!r}"
    )
    print(
        f"amplitude={float(profile.amplitude)!r} "
        f"residual={profile.el_residual:.3e}"
    )
    print(f"wrote {path} and {path}.json")
    return 0


def _cmd_breather(opt):
    r_min = opt["r_min"] if opt["K"] == 0 else opt["K"] * opt["mu"]
    cfg = PipelineConfig(
        n=opt["n"],
        p=opt["p"],
        coupling=opt["a"],
        mu=opt["mu"],
        mode=opt["mode"],
        l_max=opt["l_max"],
        r_min=r_min,
        tol=opt["tol"],
        kernel_tol=opt["kernel_tol"],
        residual_l_max=opt["residual_l_max"],
    )
    b = assemble_breather(cfg)
    err = error_vs_reference(b)
    residual = kg_residual(b)
    save_breather(f"{opt['out']}.kgbr", b)
    save_breather_report(
        f"{opt['out']}.json",
        b,
        extra={"kg_residual": residual, "errors": err.to_dict()},
    )
    print(f"breather n={b.grid.n} mode={b.mode} mu={b.mu} K={b.grid.K}")
    print(f"omega={b.omega!r}")
    print(f"kg_residual={residual:.3e} symmetry={b.symmetry_error():.3e}")
    print(f"e_h2={err.e_h2:.6e} e_sup={err.e_sup:.6e}")
    print(f"wrote {opt['out']}.kgbr and {opt['out']}.json")
    return 0


def _cmd_scaling(opt):
    mus = _parse_mu_list(opt["mu_list"])
    kwargs = {"l_max": opt["l_max"], "r_min": opt["r_min"]}
    if opt["residual_l_max"]:
        kwargs["residual_l_max"] = opt["residual_l_max"]

    def progress(mu, row):
        if row is None:
            print(f"  mu={mu}: failed")
        else:
            print(f"  mu={mu}: e_h2={row.e_h2:.4e} e_sup={row.e_sup:.4e} "
                  f"residual={row.kg_residual:.2e}")

    table = scaling_study(
        mus, n=opt["n"], p=opt["p"], coupling=opt["a"], mode=opt["mode"],
        progress=progress, **kwargs,
    )
    table.to_csv(f"{opt['out']}.csv")
    table.to_json(f"{opt['out']}.json")
    if table.failures:
        print(f"failures: {table.failures}")
    for name in ("e_h2", "e_sup", "w_x2", "dist_phi_dnls", "dist_dnls_ref"):
        try:
            fit = table.slope(name)
        except GuardError as exc:
            print(f"slope({name}): unavailable ({exc})")
            continue
        print(f"slope({name}) = {fit.slope:.4f} +- {fit.stderr:.4f}")
    print(f"wrote {opt['out']}.csv and {opt['out']}.json")
    return 0


def _cmd_validate(opt):
    b = load_breather(opt["input"])
    err = error_vs_reference(b)
    payload = {
        "input": opt["input"],
        "n": b.grid.n,
        "mode": b.mode,
        "mu": b.mu,
        "omega": b.omega,
        "kg_residual": kg_residual(b),
        "symmetry_error": b.symmetry_error(),
        "errors": err.to_dict(),
    }
    if opt["integrate"]:
        rep = integrate_period(
            b, steps_per_period=opt["steps"], periods=opt["periods"]
        )
        payload["integration"] = rep.to_dict()
    text = json.dumps(payload, indent=2, default=float)
    if opt["out"]:
        with open(opt["out"], "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {opt['out']}")
    else:
        print(text)
    return 0


def _cmd_fem_check(opt):
    mus = _parse_mu_list(opt["mu_list"])
    profile = solve_ground_state(opt["n"], opt["p"])
    q = 2.0 * opt["p"]
    rows = []
    for mu in mus:
        grid = GridSpec.for_radius(opt["n"], mu=mu, r_min=opt["r_min"])
        seq = sample_reference(profile, grid)
        g_c, g_d, r_g = functional_remainder(FemInterpolant(seq), q=q)
        chain = float(
            mu**grid.n * np.sum(np.abs(seq.values) ** (4.0 * opt["p"] + 2.0))
            / norm_q_mu(seq.values, grid) ** (4.0 * opt["p"] + 2.0)
        )
        rows.append({"mu": mu, "G_c": g_c, "G_d": g_d, "R_G": r_g,
                     "embedding_ratio": chain})
        print(f"  mu={mu}: G_c={g_c:.8e} G_d={g_d:.8e} R_G={r_g:+.3e}")
    payload = {"n": opt["n"], "p": opt["p"], "rows": rows}
    if len(rows) >= 4:
        x = np.log([r["mu"] for r in rows])
        y = np.log([abs(r["R_G"]) for r in rows])
        slope, intercept = np.polyfit(x, y, 1)
        payload["rg_slope"] = float(slope)
        print(f"slope(|R_G|) = {slope:.4f}")
    if opt["out"]:
        with open(opt["out"], "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"wrote {opt['out']}")
    return 0


_RUNNERS = {
    "groundstate": _cmd_groundstate,
    "breather": _cmd_breather,
    "scaling": _cmd_scaling,
    "validate": _cmd_validate,
    "fem-check": _cmd_fem_check,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kgbreather",
        description="discrete breathers in Klein-Gordon lattices near the "
        "continuum NLS limit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("groundstate", help="solve the continuum NLS profile")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--out", type=str)

    sp = sub.add_parser("breather", help="assemble one breather and save it")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--a", type=float, help="lattice coupling in (0, 1/2)")
    sp.add_argument("--mu", type=float)
    sp.add_argument("--mode", choices=("st", "p", "h1", "h2"))
    sp.add_argument("--K", type=int, help="explicit box half-width (overrides --r-min)")
    sp.add_argument("--l-max", dest="l_max", type=int)
    sp.add_argument("--r-min", dest="r_min", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--kernel-tol", dest="kernel_tol", type=float)
    sp.add_argument("--residual-l-max", dest="residual_l_max", type=int)
    sp.add_argument("--out", type=str)

    sp = sub.add_parser("scaling", help="mu sweep with log-log slopes")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--a", type=float)
    sp.add_argument("--mode", choices=("st", "p", "h1", "h2"))
    sp.add_argument("--mu-list", dest="mu_list", type=str,
                    help="comma-separated, strictly decreasing")
    sp.add_argument("--l-max", dest="l_max", type=int)
    sp.add_argument("--r-min", dest="r_min", type=float)
    sp.add_argument("--residual-l-max", dest="residual_l_max", type=int)
    sp.add_argument("--out", type=str)

    sp = sub.add_parser("validate", help="recheck a saved breather file")
    sp.add_argument("--input", type=str)
    sp.add_argument("--integrate", action="store_const", const=True)
    sp.add_argument("--steps", type=int, help="leapfrog steps per period")
    sp.add_argument("--periods", type=int)
    sp.add_argument("--out", type=str)

    sp = sub.add_parser("fem-check", help="lattice-vs-continuum functional gap")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--mu-list", dest="mu_list", type=str)
    sp.add_argument("--r-min", dest="r_min", type=float)
    sp.add_argument("--out", type=str)

    for sp_action in sub.choices.values():
        sp_action.add_argument("--config", type=str,
                               help="key=value file; flags take precedence")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        options = _merge(args, args.command)
        return _RUNNERS[args.command](options)
    except (GuardError, ResonanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except KGBreatherError as exc:  # pragma: no cover - future subclasses
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
