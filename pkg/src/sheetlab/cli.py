"""Command-line front end.

Commands: density, moments, solve, mc-compare, residual, equivalence.
Options may come from a flat key=value config file (``--config``); explicit
flags win over file values.  Every CSV artifact starts with a comment line

    # sheetlab <version> config-hash=<hex>

where the hash digests the fully resolved configuration, so a run can be
reproduced from its artifact alone.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, SheetlabError
from .fractional import FractionalOrder, TimeGrid1D
from .densities import (
    StableMethod,
    bm_density,
    bs_density,
    density_pde_residual,
    inv_subordinator_density,
    laplace_check,
    stable_g,
)
from .initial_functions import get_initial_function
from .moments import MomentRoute, moment_E
from .reports import SystemId
from .samplers import FieldKind, RngStream, Weight, mc_expectation
from .solutions import (
    Functional,
    QuadratureSpec,
    SolutionField,
    eval_functional,
    oracle_line,
    startup_layers,
)
from .pde_verify import (
    equivalence_residual,
    residual_fourth_order,
    residual_fractional,
    residual_order_2nu,
)
from .solutions import eval_line

_FUNCTIONALS = {
    "u": Functional.U,
    "script-u": Functional.SCRIPT_U,
    "script-v": Functional.SCRIPT_V,
    "script-u-nu": Functional.SCRIPT_U_NU,
}

_WEIGHT_FOR = {
    Functional.U: Weight.NONE,
    Functional.SCRIPT_V: Weight.PROD_S,
    Functional.SCRIPT_U: Weight.PROD_S_SQ,
    Functional.SCRIPT_U_NU: Weight.PROD_S_NU,
}


_KEY_ALIASES = {"f": "f_name"}


def _read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{line_no}: expected key=value, got {raw!r}")
                key, value = line.split("=", 1)
                key = key.strip().replace("-", "_")
                out[_KEY_ALIASES.get(key, key)] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return out


def _resolved(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """File values fill in everything the command line left at its default."""
    merged = vars(args).copy()
    merged.pop("config", None)
    if getattr(args, "config", None):
        file_vals = _read_config_file(args.config)
        defaults = {a.dest: parser.get_default(a.dest) for a in parser._actions}
        for key, value in file_vals.items():
            if key not in merged:
                raise ConfigError(f"unknown config key {key!r}")
            if merged[key] == defaults.get(key):
                merged[key] = value
    return merged


_UNHASHED_KEYS = {"out", "per_point"}


def _config_hash(config: dict) -> str:
    canonical = ";".join(
        f"{k}={config[k]}"
        for k in sorted(config)
        if config[k] is not None and k not in _UNHASHED_KEYS
    )
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _header(config: dict) -> str:
    return f"# sheetlab {__version__} config-hash={_config_hash(config)}"


def _parse_floats(text: str) -> tuple:
    return tuple(float(v) for v in str(text).split(",") if str(v).strip() != "")


def _order_from(config) -> FractionalOrder | None:
    raw = config.get("beta")
    if raw in (None, ""):
        return None
    return FractionalOrder.parse(str(raw))


def _threads_cap() -> int:
    raw = os.environ.get("SHEETLAB_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="sheetlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sheetlab {__version__}")
    subparsers = {}
    _sub = parser.add_subparsers(dest="command", required=True)

    class _Sub:
        def add_parser(self, name, **kw):
            p = _sub.add_parser(name, **kw)
            subparsers[name] = p
            return p

    sub = _Sub()

    def common(p):
        p.add_argument("--config", help="flat key=value config file; flags win")
        p.add_argument("--out", help="CSV output path")

    p = sub.add_parser("density", help="evaluate a kernel at a point")
    common(p)
    p.add_argument("--kernel", default="inv-subordinator",
                   choices=["bm", "bs", "stable-g", "inv-subordinator"])
    p.add_argument("--beta", default=None, help="fractional order, e.g. 1/2 or 0.4")
    p.add_argument("--t", default="1.0", help="time point (bs: comma list of s_i)")
    p.add_argument("--x", default="1.0", help="evaluation point (comma list for bs)")
    p.add_argument("--y", default=None, help="target point for the sheet kernel")
    p.add_argument("--method", default="auto",
                   choices=[m.value for m in StableMethod])

    p = sub.add_parser("moments", help="moment constant E(beta, gamma)")
    common(p)
    p.add_argument("--beta", required=True)
    p.add_argument("--k", default="1", help="gamma (integer for the closed form)")
    p.add_argument("--route", default="closed-form",
                   choices=[r.value for r in MomentRoute])
    p.add_argument("--samples", default="1000000")
    p.add_argument("--seed", default="0")

    p = sub.add_parser("solve", help="evaluate a solution functional")
    common(p)
    p.add_argument("--kind", default="btbs", choices=["btbs", "isltbs"])
    p.add_argument("--functional", default="u", choices=list(_FUNCTIONALS))
    p.add_argument("--f", dest="f_name", default="quadratic")
    p.add_argument("--n", default="1")
    p.add_argument("--d", default="1")
    p.add_argument("--j", default="1")
    p.add_argument("--beta", default=None)
    p.add_argument("--alpha", default="1.0", help="bump regularity exponent")
    p.add_argument("--t", default="1.0", help="comma list, length n")
    p.add_argument("--x", default="0.0", help="comma list, length d")
    p.add_argument("--t-grid", dest="t_grid", default=None,
                   help="active-axis lattice min,max,steps (emits CSV)")
    p.add_argument("--inner-nodes", dest="inner_nodes", default="64")
    p.add_argument("--outer-nodes", dest="outer_nodes", default="96")
    p.add_argument("--tolerance", default=None)
    p.add_argument("--polynomial-growth", dest="polynomial_growth", default="true")

    p = sub.add_parser("mc-compare", help="quadrature vs Monte Carlo for one functional")
    common(p)
    p.add_argument("--kind", default="btbs", choices=["btbs", "isltbs"])
    p.add_argument("--functional", default="u", choices=list(_FUNCTIONALS))
    p.add_argument("--f", dest="f_name", default="quadratic")
    p.add_argument("--n", default="1")
    p.add_argument("--d", default="1")
    p.add_argument("--j", default="1")
    p.add_argument("--beta", default=None)
    p.add_argument("--t", default="1.0")
    p.add_argument("--x", default="0.0")
    p.add_argument("--samples", default="100000")
    p.add_argument("--seed", default="0")
    p.add_argument("--polynomial-growth", dest="polynomial_growth", default="true")

    p = sub.add_parser("residual", help="PDE-system residual on a lattice")
    common(p)
    p.add_argument("--system", required=True,
                   choices=["fourth-order", "half-fractional", "beta-fractional", "order-2nu",
                            "density-pde"])
    p.add_argument("--kind", default="btbs", choices=["btbs", "isltbs"])
    p.add_argument("--f", dest="f_name", default="quadratic")
    p.add_argument("--n", default="1")
    p.add_argument("--j", default="1")
    p.add_argument("--beta", default=None)
    p.add_argument("--t-frozen", dest="t_frozen", default="", help="comma list, length n-1")
    p.add_argument("--t-min", dest="t_min", default="0.5")
    p.add_argument("--t-max", dest="t_max", default="2.0")
    p.add_argument("--tau", default="0.001")
    p.add_argument("--x-min", dest="x_min", default="-1.0")
    p.add_argument("--x-max", dest="x_max", default="1.0")
    p.add_argument("--x-steps", dest="x_steps", default="128")
    p.add_argument("--per-point", dest="per_point", default=None,
                   help="also write the per-point residual CSV here")
    p.add_argument("--polynomial-growth", dest="polynomial_growth", default="true")

    p = sub.add_parser("equivalence", help="conditional-equivalence residual")
    common(p)
    p.add_argument("--variant", default="btbs", choices=["btbs", "isltbs"])
    p.add_argument("--f", dest="f_name", default="quadratic")
    p.add_argument("--n", default="1")
    p.add_argument("--j", default="1")
    p.add_argument("--beta", default=None)
    p.add_argument("--t-frozen", dest="t_frozen", default="")
    p.add_argument("--t-max", dest="t_max", default="2.0")
    p.add_argument("--tau", default="0.001")
    p.add_argument("--x-min", dest="x_min", default="-1.0")
    p.add_argument("--x-max", dest="x_max", default="1.0")
    p.add_argument("--x-steps", dest="x_steps", default="128")
    p.add_argument("--per-point", dest="per_point", default=None)
    p.add_argument("--polynomial-growth", dest="polynomial_growth", default="true")
    return parser, subparsers


def _flag(value) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _cmd_density(config) -> int:
    kernel = config["kernel"]
    order = _order_from(config)
    if kernel == "bm":
        value = bm_density(float(config["t"]), float(config["x"]))
    elif kernel == "bs":
        if config.get("y") is None:
            raise ConfigError("the sheet kernel needs --y")
        value = bs_density(_parse_floats(config["t"]), _parse_floats(config["x"]),
                           _parse_floats(config["y"]))
    elif kernel == "stable-g":
        if order is None:
            raise ConfigError("stable-g needs --beta")
        value = stable_g(order.beta, float(config["x"]), StableMethod(config["method"]))
    else:
        if order is None:
            raise ConfigError("inv-subordinator needs --beta")
        value = inv_subordinator_density(order.beta, float(config["t"]), float(config["x"]))
    print(f"value={value:.17g}")
    if config.get("out"):
        with open(config["out"], "w", encoding="utf-8") as fh:
            fh.write(_header(config) + "\n")
            fh.write("kernel,value\n")
            fh.write(f"{kernel},{value:.17g}\n")
    return 0


def _cmd_moments(config) -> int:
    order = FractionalOrder.parse(str(config["beta"]))
    route = MomentRoute(config["route"])
    constant = moment_E(
        order,
        float(config["k"]),
        route,
        samples=int(float(config["samples"])),
        stream=RngStream(int(config["seed"])),
    )
    if constant.stderr is not None:
        print(f"value={constant.value:.17g} stderr={constant.stderr:.17g}")
    else:
        print(f"value={constant.value:.17g}")
    if config.get("out"):
        with open(config["out"], "w", encoding="utf-8") as fh:
            fh.write(_header(config) + "\n")
            fh.write("beta,gamma,route,value,stderr\n")
            se = "" if constant.stderr is None else f"{constant.stderr:.17g}"
            fh.write(f"{order},{constant.gamma:g},{route.value},{constant.value:.17g},{se}\n")
    return 0


def _solve_setup(config):
    kind = FieldKind(config["kind"])
    functional = _FUNCTIONALS[config["functional"]]
    order = _order_from(config)
    if kind is FieldKind.ISLTBS and order is None:
        raise ConfigError("isltbs requires --beta")
    n = int(config["n"])
    d = int(config["d"])
    j = int(config["j"])
    if not (1 <= j <= n):
        raise ConfigError(f"j={j} outside 1..{n}")
    f = get_initial_function(
        config["f_name"], d=d, alpha=float(config.get("alpha", 1.0)),
        polynomial_growth=_flag(config.get("polynomial_growth", "true")),
    )
    t = _parse_floats(config["t"])
    x = np.asarray(_parse_floats(config["x"]))
    if len(t) != n or x.size != d:
        raise ConfigError(f"need {n} time parameters and {d} space coordinates")
    return kind, functional, order, f, t, x, j, n


def _cmd_solve(config) -> int:
    kind, functional, order, f, t, x, j, n = _solve_setup(config)
    spec_kwargs = {
        "inner_nodes": int(config["inner_nodes"]),
        "outer_nodes": int(config["outer_nodes"]),
    }
    if config.get("tolerance"):
        spec_kwargs["tolerance"] = float(config["tolerance"])
    else:
        spec_kwargs["tolerance"] = 1e-6 if n == 1 else 1e-5
    spec = QuadratureSpec(**spec_kwargs)

    if config.get("t_grid"):
        lo, hi, steps = _parse_floats(config["t_grid"])
        line = np.linspace(lo, hi, int(steps) + 1)
        frozen = tuple(v for i, v in enumerate(t, start=1) if i != j)
        values = eval_line(functional, kind, f, line, frozen, j, x[None, :],
                           order=order, spec=spec)
        t_points = np.empty((line.size, n))
        for idx, tv in enumerate(line):
            parts = list(frozen)
            parts.insert(j - 1, tv)
            t_points[idx] = parts
        field = SolutionField(functional, kind, j, t_points, x[None, :], values)
        if not config.get("out"):
            raise ConfigError("--t-grid output needs --out")
        field.write_csv(config["out"], header_comment=_header(config))
        print(f"rows={line.size} inf={np.max(np.abs(values)):.17g} out={config['out']}")
        return 0

    value = eval_functional(functional, kind, f, t, x, j=j, order=order, spec=spec)
    print(f"value={value:.17g}")
    if config.get("out"):
        field = SolutionField(functional, kind, j, np.asarray([t]), x[None, :],
                              np.asarray([[value]]))
        field.write_csv(config["out"], header_comment=_header(config))
    return 0


def _cmd_mc_compare(config) -> int:
    kind, functional, order, f, t, x, j, n = _solve_setup(config)
    quad_value = eval_functional(functional, kind, f, t, x, j=j, order=order)
    estimate, stderr = mc_expectation(
        kind, f, _WEIGHT_FOR[functional], j, t, x,
        int(float(config["samples"])), RngStream(int(config["seed"])),
        beta=order.beta if order else None,
        nu=order.nu if order else None,
    )
    gap = abs(quad_value - estimate)
    print(
        f"quadrature={quad_value:.17g} mc={estimate:.17g} stderr={stderr:.17g} gap={gap:.17g}"
    )
    if config.get("out"):
        with open(config["out"], "w", encoding="utf-8") as fh:
            fh.write(_header(config) + "\n")
            fh.write("quadrature,mc,stderr,gap\n")
            fh.write(f"{quad_value:.17g},{estimate:.17g},{stderr:.17g},{gap:.17g}\n")
    return 0


def _residual_fields(config, functional_pair, system):
    kind = FieldKind(config["kind"])
    order = _order_from(config)
    n = int(config["n"])
    j = int(config["j"])
    f = get_initial_function(
        config["f_name"], d=1,
        polynomial_growth=_flag(config.get("polynomial_growth", "true")),
    )
    frozen = _parse_floats(config.get("t_frozen", "") or "")
    if len(frozen) != n - 1:
        raise ConfigError(f"--t-frozen needs {n - 1} values for n={n}")
    x = np.linspace(float(config["x_min"]), float(config["x_max"]),
                    int(config["x_steps"]) + 1)
    tau = float(config["tau"])
    return kind, order, n, j, f, frozen, x, tau


def _cmd_residual(config) -> int:
    system = config["system"]
    if system == "density-pde":
        order = _order_from(config)
        if order is None or order.nu is None:
            raise ConfigError("density-pde needs --beta 1/nu")
        t_grid = np.arange(float(config["t_min"]), float(config["t_max"]) + 1e-12,
                           float(config["tau"]))
        x = np.linspace(max(float(config["x_min"]), 0.05), float(config["x_max"]),
                        int(config["x_steps"]) + 1)
        report = density_pde_residual(order, t_grid, x)
    else:
        kind, order, n, j, f, frozen, x, tau = _residual_fields(config, None, system)
        t_min, t_max = float(config["t_min"]), float(config["t_max"])
        if system in ("fourth-order", "order-2nu"):
            line = np.arange(t_min - 2 * tau, t_max + 2.5 * tau, tau)
            u = oracle_line(Functional.U, kind, f, line, frozen, j, x[:, None], order=order)
            if system == "fourth-order":
                su = oracle_line(Functional.SCRIPT_U, kind, f, line, frozen, j,
                                 x[:, None], order=order)
                report = residual_fourth_order(u, su, f, line, frozen, j, x,
                                               report_t_min=t_min)
            else:
                if order is None or order.nu is None:
                    raise ConfigError("order-2nu needs --beta 1/nu")
                su = oracle_line(Functional.SCRIPT_U_NU, kind, f, line, frozen, j,
                                 x[:, None], order=order)
                report = residual_order_2nu(u, su, f, order, line, frozen, j, x,
                                            report_t_min=t_min)
        else:
            steps = int(round(t_max / tau))
            grid = TimeGrid1D.uniform(t_max, steps)
            u = oracle_line(Functional.U, kind, f, grid.points, frozen, j,
                            x[:, None], order=order)
            sv = oracle_line(Functional.SCRIPT_V, kind, f, grid.points, frozen, j,
                             x[:, None], order=order)
            if system == "half-fractional" and kind is not FieldKind.BTBS:
                raise ConfigError("half-fractional is the Brownian-clock system")
            if system == "beta-fractional" and kind is not FieldKind.ISLTBS:
                raise ConfigError("beta-fractional is the inverse-clock system")
            report = residual_fractional(u, sv, kind, grid, x, j, order=order,
                                         report_t_min=t_min)
    print(
        f"system={report.system.value} j={report.j} inf_norm={report.residual_inf_norm:.17g} "
        f"l2_norm={report.residual_l2_norm:.17g}"
    )
    if config.get("out"):
        report.write_csv(config["out"], header_comment=_header(config))
    if config.get("per_point"):
        names = ["t", "x"] if report.system is SystemId.DENSITY_PDE else ["tj", "x"]
        report.write_per_point_csv(config["per_point"], names, header_comment=_header(config))
    return 0


def _cmd_equivalence(config) -> int:
    variant = FieldKind(config["variant"])
    order = _order_from(config)
    n = int(config["n"])
    j = int(config["j"])
    f = get_initial_function(
        config["f_name"], d=1,
        polynomial_growth=_flag(config.get("polynomial_growth", "true")),
    )
    frozen = _parse_floats(config.get("t_frozen", "") or "")
    if len(frozen) != n - 1:
        raise ConfigError(f"--t-frozen needs {n - 1} values for n={n}")
    if variant is FieldKind.ISLTBS and (order is None or order.nu is None):
        raise ConfigError("the isltbs variant needs --beta 1/nu")
    x = np.linspace(float(config["x_min"]), float(config["x_max"]),
                    int(config["x_steps"]) + 1)
    tau = float(config["tau"])
    t_max = float(config["t_max"])
    grid = TimeGrid1D.uniform(t_max, int(round(t_max / tau)))

    if f.name in ("quadratic", "quartic"):
        u_fn = Functional.SCRIPT_U if variant is FieldKind.BTBS else Functional.SCRIPT_U_NU
        su = oracle_line(u_fn, variant, f, grid.points, frozen, j, x[:, None], order=order)
        sv = oracle_line(Functional.SCRIPT_V, variant, f, grid.points, frozen, j,
                         x[:, None], order=order)
        startup = None
    else:
        u_fn = Functional.SCRIPT_U if variant is FieldKind.BTBS else Functional.SCRIPT_U_NU
        su = eval_line(u_fn, variant, f, grid.points, frozen, j, x[:, None], order=order)
        sv = eval_line(Functional.SCRIPT_V, variant, f, grid.points, frozen, j,
                       x[:, None], order=order)
        startup = None
        if variant is FieldKind.ISLTBS:
            nu = order.nu
            m_values = [m for m in range(1, 2 * nu) if (m % nu) != 0 and m <= f.max_k]
            startup = startup_layers(Functional.SCRIPT_V, variant, f, x[:, None],
                                     m_values, t_frozen=frozen, j=j, order=order)
    report = equivalence_residual(su, sv, variant, grid, x, j, order=order, startup=startup)
    print(
        f"system={report.system.value} j={report.j} inf_norm={report.residual_inf_norm:.17g} "
        f"l2_norm={report.residual_l2_norm:.17g} commute_gap={report.commute_gap:.17g}"
    )
    if config.get("out"):
        report.write_csv(config["out"], header_comment=_header(config))
    if config.get("per_point"):
        report.write_per_point_csv(config["per_point"], ["tj", "x"],
                                   header_comment=_header(config))
    return 0


_COMMANDS = {
    "density": _cmd_density,
    "moments": _cmd_moments,
    "solve": _cmd_solve,
    "mc-compare": _cmd_mc_compare,
    "residual": _cmd_residual,
    "equivalence": _cmd_equivalence,
}


def main(argv=None) -> int:
    parser, subparsers = _build_parser()
    args = parser.parse_args(argv)
    _threads_cap()  # single-threaded compute; the cap is trivially honored
    try:
        config = _resolved(args, subparsers[args.command])
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except SheetlabError as exc:
        op = type(exc).__name__
        print(f"error: {op}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
