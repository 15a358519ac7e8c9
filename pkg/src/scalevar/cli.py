"""Batch experiment runner: parse a JSON config, execute one check, emit CSV
plus a JSON summary.

Usage:  scalevar run <config.json> [--set key=value]...

Exit codes: 0 success, 2 validation error (schema, expressions, grids),
3 numerical failure (NaN, divergence, degenerate data).  Output files are
written atomically (temp file, then rename) and are byte-identical across
runs of the same config.  SCALEVAR_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .errors import NumericalError, ScaleVarError, ValidationError
from .funcspace import Path, estimate_holder, make_grid, oscillation_profile, weierstrass
from .lagdsl import Bindings, evaluate, parse
from .scaleops import ScaleParams, parse_mu, scale_derivative_path
from .schrodinger import (
    SchrodingerProblem,
    energy_constant,
    integrate_trajectory,
    schrodinger_residual,
)
from .varcalc import (
    LagrangianSpec,
    SymmetrySpec,
    _invariance_integrand,
    evaluate_functional,
    functional_integrand,
    dubois_reymond_residual,
    euler_lagrange_residual,
    invariance_derivative,
    invariance_integrand_integral,
    noether_constant,
)

__all__ = ["run", "main", "max_threads", "COMMANDS"]

COMMANDS = (
    "deriv",
    "functional",
    "check-el",
    "check-dbr",
    "invariance",
    "noether",
    "schrodinger",
    "holder",
)


def max_threads() -> int:
    """Internal parallelism cap from SCALEVAR_THREADS (default 1)."""
    raw = os.environ.get("SCALEVAR_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Config plumbing

_MISSING = object()


def _walk(cfg: dict, dotted: str, default=_MISSING):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is _MISSING:
                raise ValidationError(f'missing field "{dotted}"')
            return default
        node = node[part]
    return node


def _field(cfg, dotted, types, default=_MISSING, check=None, what=""):
    value = _walk(cfg, dotted, default)
    if value is default and default is not _MISSING:
        return value
    if types is not None and not isinstance(value, types):
        raise ValidationError(f'invalid field "{dotted}": expected {what or types}, got {value!r}')
    if check is not None and not check(value):
        raise ValidationError(f'invalid field "{dotted}": {what} (got {value!r})')
    return value


def _real(cfg, dotted, default=_MISSING):
    value = _field(cfg, dotted, (int, float), default=default, what="a finite number")
    if isinstance(value, bool) or (isinstance(value, float) and not math.isfinite(value)):
        raise ValidationError(f'invalid field "{dotted}": expected a finite number, got {value!r}')
    return float(value)


def _apply_overrides(cfg: dict, overrides) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"--set needs KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = cfg
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError(f'--set cannot descend into non-object field "{key}"')
        node[parts[-1]] = value
    return cfg


def _load_config(config_path: str, overrides) -> dict:
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as err:
        raise ValidationError(f"config is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    return _apply_overrides(cfg, overrides)


def _config_grid(cfg):
    a = _real(cfg, "grid.a")
    b = _real(cfg, "grid.b")
    n = _field(cfg, "grid.n", int, what="an integer >= 2")
    pad = _real(cfg, "grid.pad")
    try:
        return make_grid(a, b, n, pad)
    except ValidationError as err:
        raise ValidationError(f'invalid field "grid": {err}') from err


def _config_scale(cfg, grid=None, default_mu=None):
    epsilon = _real(cfg, "scale.epsilon")
    mu_raw = _walk(cfg, "scale.mu", default=None)
    if mu_raw is None:
        if default_mu is None:
            raise ValidationError('missing field "scale.mu"')
        mu_raw = default_mu
    if not isinstance(mu_raw, str):
        raise ValidationError(
            f'invalid field "scale.mu": expected one of the strings "1", "-1", "0", "i", "-i", got {mu_raw!r}'
        )
    try:
        mu = parse_mu(mu_raw)
    except ValidationError as err:
        raise ValidationError(f'invalid field "scale.mu": {err}') from err
    if not epsilon > 0:
        raise ValidationError(f'invalid field "scale.epsilon": must be positive, got {epsilon}')
    if grid is not None:
        try:
            grid.steps_of(epsilon)
        except ValidationError as err:
            raise ValidationError(f'invalid field "scale.epsilon": {err}') from err
    return ScaleParams(epsilon, mu)


def _config_params(cfg) -> dict:
    raw = _field(cfg, "problem.params", dict, default={}, what="an object")
    params = {}
    for name, value in raw.items():
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            params[name] = complex(value)
        elif (
            isinstance(value, list)
            and len(value) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)
        ):
            params[name] = complex(value[0], value[1])
        else:
            raise ValidationError(
                f'invalid field "problem.params.{name}": expected a number or [re, im] pair'
            )
    return params


def _parse_field_expr(cfg, dotted, dim, params):
    text = _field(cfg, dotted, str, what="an expression string")
    try:
        return parse(text, dim, param_names=tuple(params))
    except ValidationError as err:
        raise ValidationError(f'invalid field "{dotted}": {err}') from err


def _expr_list(cfg, dotted):
    raw = _walk(cfg, dotted)
    if isinstance(raw, str):
        return [raw]
    if isinstance(raw, list) and raw and all(isinstance(x, str) for x in raw):
        return list(raw)
    raise ValidationError(f'invalid field "{dotted}": expected an expression or list of expressions')


def _config_path(cfg, grid, params, dotted="problem.path") -> Path:
    """Sample the configured time-expression path onto the padded grid."""
    texts = _expr_list(cfg, dotted)
    exprs = []
    for k, text in enumerate(texts):
        try:
            exprs.append(parse(text, 0, param_names=tuple(params)))
        except ValidationError as err:
            field = dotted if isinstance(_walk(cfg, dotted), str) else f"{dotted}[{k}]"
            raise ValidationError(f'invalid field "{field}": {err}') from err
    ts = grid.nodes()
    cols = []
    for expr in exprs:
        out = evaluate(expr, Bindings(t=ts, q=(), v=(), params=params))
        cols.append(np.array(np.broadcast_to(np.asarray(out, dtype=np.complex128), ts.shape)))
    return Path.from_samples(grid, np.stack(cols, axis=1), label="config path")


def _config_lagrangian(cfg, params, dim) -> LagrangianSpec:
    text = _field(cfg, "problem.L", str, what="an expression string")
    try:
        return LagrangianSpec.from_text(text, dim=dim, params=params)
    except ValidationError as err:
        raise ValidationError(f'invalid field "problem.L": {err}') from err


def _config_symmetry(cfg, params, dim) -> SymmetrySpec:
    tau = _field(cfg, "problem.tau", str, what="an expression string")
    xi = _expr_list(cfg, "problem.xi")
    if len(xi) != dim:
        raise ValidationError(f'invalid field "problem.xi": expected {dim} components, got {len(xi)}')
    s_step = _real(cfg, "problem.s_step", default=1e-4)
    try:
        return SymmetrySpec.from_text(tau, xi, dim=dim, params=params, s_step=s_step)
    except ValidationError as err:
        raise ValidationError(f'invalid field "problem.tau/problem.xi": {err}') from err


# ---------------------------------------------------------------------------
# Output writers


def _fmt_num(x) -> str:
    f = float(x)
    if not math.isfinite(f):
        raise NumericalError("non-finite value in output")
    return repr(f)


def _atomic_write(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(prefix: str, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt_num(x) for x in row))
    _atomic_write(prefix + ".csv", "\n".join(lines) + "\n")


def _write_summary(prefix: str, summary: dict) -> None:
    cleaned = {}
    for key, value in summary.items():
        if isinstance(value, float):
            if not math.isfinite(value):
                raise NumericalError("non-finite value in summary")
            cleaned[key] = float(value)
        else:
            cleaned[key] = value
    _atomic_write(prefix + ".summary.json", json.dumps(cleaned, sort_keys=True, indent=2) + "\n")


def _complex_columns(prefix: str, dim: int):
    if dim == 1:
        return [f"{prefix}re_1", f"{prefix}im_1"]
    cols = []
    for k in range(1, dim + 1):
        cols += [f"{prefix}re_{k}", f"{prefix}im_{k}"]
    return cols


def _series_rows(ts, arrays):
    """Rows (t, re, im, ...) from a time vector and complex arrays (N,) or (N, d)."""
    mats = []
    for arr in arrays:
        arr = np.asarray(arr)
        mats.append(arr[:, None] if arr.ndim == 1 else arr)
    rows = []
    for i, t in enumerate(ts):
        row = [t]
        for mat in mats:
            for z in mat[i]:
                row += [z.real, z.imag]
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Commands


def _cmd_deriv(cfg):
    grid = _config_grid(cfg)
    sp = _config_scale(cfg, grid)
    params = _config_params(cfg)
    p = _config_path(cfg, grid, params)
    dpath = scale_derivative_path(p, sp)
    core = dpath.grid.core
    ts = dpath.grid.nodes()[core]
    vals = dpath.values[core]
    mags = np.abs(vals)
    header = ["t"] + _complex_columns("", p.dim)
    summary = {
        "command": "deriv",
        "n_nodes": int(ts.size),
        "max_abs": float(mags.max()),
        "l2": float(math.sqrt(grid.h * float((mags**2).sum()))),
    }
    return header, _series_rows(ts, [vals]), summary


def _cmd_functional(cfg):
    grid = _config_grid(cfg)
    sp = _config_scale(cfg, grid)
    params = _config_params(cfg)
    p = _config_path(cfg, grid, params)
    Lg = _config_lagrangian(cfg, params, p.dim)
    ts, integrand, _ = functional_integrand(Lg, p, sp)
    value = evaluate_functional(Lg, p, sp)
    header = ["t", "re_1", "im_1"]
    summary = {
        "command": "functional",
        "n_nodes": int(ts.size),
        "value_re": value.real,
        "value_im": value.imag,
    }
    return header, _series_rows(ts, [integrand]), summary


def _cmd_residual(cfg, which: str):
    grid = _config_grid(cfg)
    sp = _config_scale(cfg, grid)
    params = _config_params(cfg)
    p = _config_path(cfg, grid, params)
    Lg = _config_lagrangian(cfg, params, p.dim)
    op = euler_lagrange_residual if which == "check-el" else dubois_reymond_residual
    report = op(Lg, p, sp)
    dim = 1 if report.residuals.ndim == 1 else report.residuals.shape[1]
    header = ["t"] + _complex_columns("", dim)
    summary = {
        "command": which,
        "n_nodes": int(report.node_times.size),
        "max_abs": report.max_abs,
        "l2": report.l2,
    }
    return header, _series_rows(report.node_times, [report.residuals]), summary


def _cmd_invariance(cfg):
    grid = _config_grid(cfg)
    sp = _config_scale(cfg, grid)
    params = _config_params(cfg)
    p = _config_path(cfg, grid, params)
    Lg = _config_lagrangian(cfg, params, p.dim)
    sym = _config_symmetry(cfg, params, p.dim)
    derivative = invariance_derivative(Lg, p, sym, sp)
    integral = invariance_integrand_integral(Lg, p, sym, sp)
    ts, integrand, _ = _invariance_integrand(Lg, p, sym, sp)
    header = ["t", "re_1", "im_1"]
    summary = {
        "command": "invariance",
        "n_nodes": int(ts.size),
        "derivative_re": derivative.real,
        "derivative_im": derivative.imag,
        "integral_re": integral.real,
        "integral_im": integral.imag,
        "difference_abs": abs(derivative - integral),
    }
    return header, _series_rows(ts, [integrand]), summary


def _cmd_noether(cfg):
    grid = _config_grid(cfg)
    sp = _config_scale(cfg, grid)
    params = _config_params(cfg)
    p = _config_path(cfg, grid, params)
    Lg = _config_lagrangian(cfg, params, p.dim)
    sym = _config_symmetry(cfg, params, p.dim)
    report = noether_constant(Lg, p, sym, sp)
    header = ["t", "c_re", "c_im"]
    summary = {
        "command": "noether",
        "n_nodes": int(report.node_times.size),
        "mean_re": report.mean.real,
        "mean_im": report.mean.imag,
        "drift": report.drift,
    }
    return header, _series_rows(report.node_times, [report.constant_samples]), summary


def _cmd_schrodinger(cfg):
    grid = _config_grid(cfg)
    # forward operator by default: consistent with the integrator's dq/dt
    sp = _config_scale(cfg, grid, default_mu="-i")
    params = _config_params(cfg)
    q0_raw = _field(cfg, "problem.q0", list, what="a list of initial components")
    q0 = []
    for k, item in enumerate(q0_raw):
        if isinstance(item, (int, float)) and not isinstance(item, bool):
            q0.append(complex(item))
        elif isinstance(item, list) and len(item) == 2:
            q0.append(complex(item[0], item[1]))
        else:
            raise ValidationError(f'invalid field "problem.q0[{k}]": expected a number or [re, im]')
    dim = len(q0)
    if dim < 1:
        raise ValidationError('invalid field "problem.q0": needs at least one component')
    psi = _field(cfg, "problem.psi", str, what="an expression string")
    potential = _field(cfg, "problem.potential", str, what="an expression string")
    hbar = _real(cfg, "problem.hbar")
    mass = _real(cfg, "problem.m")
    try:
        prob = SchrodingerProblem(psi, potential, hbar, mass, dim=dim, params=params)
    except ValidationError as err:
        raise ValidationError(f'invalid field "problem.psi/problem.potential": {err}') from err
    traj = integrate_trajectory(prob, q0, grid)
    energy = energy_constant(prob, traj, sp)
    core = grid.core
    ts = grid.nodes()[core]
    qs = traj.path.values[core]
    residual = schrodinger_residual(prob, ts, qs)
    thm, var = energy.theorem, energy.variant
    header = (
        ["t"]
        + _complex_columns("", dim)
        + ["c_thm_re", "c_thm_im", "c_var_re", "c_var_im"]
    )
    # core nodes of the energy window coincide with the grid core, so qs aligns
    rows = _series_rows(thm.node_times, [qs, thm.constant_samples, var.constant_samples])
    summary = {
        "command": "schrodinger",
        "n_nodes": int(thm.node_times.size),
        "residual_max_abs": residual.max_abs,
        "drift_thm": thm.drift,
        "mean_thm_re": thm.mean.real,
        "mean_thm_im": thm.mean.imag,
        "drift_variant": var.drift,
        "mean_variant_re": var.mean.real,
        "mean_variant_im": var.mean.imag,
        "forms_max_difference": float(
            np.max(np.abs(thm.constant_samples - var.constant_samples))
        ),
    }
    return header, rows, summary


def _cmd_holder(cfg):
    grid = _config_grid(cfg)
    _config_scale(cfg, None)  # schema completeness; the estimator itself is scale-free
    params = _config_params(cfg)
    deltas = _field(cfg, "problem.deltas", list, what="a list of decreasing deltas")
    sample_count = _field(cfg, "problem.sample_count", int, what="an integer >= 2")
    source = _walk(cfg, "problem.weierstrass", default=None)
    meta_alpha = None
    if source is not None:
        a_coef = _real(cfg, "problem.weierstrass.a_coef")
        b_base = _real(cfg, "problem.weierstrass.b_base")
        trunc_tol = _real(cfg, "problem.weierstrass.trunc_tol")
        try:
            p = weierstrass(a_coef, b_base, trunc_tol)
        except ValidationError as err:
            raise ValidationError(f'invalid field "problem.weierstrass": {err}') from err
        meta_alpha = p.meta["holder_alpha"]
    else:
        p = _config_path(cfg, grid, params)
    try:
        deltas_f = [float(d) for d in deltas]
    except (TypeError, ValueError):
        raise ValidationError('invalid field "problem.deltas": expected numbers') from None
    workers = max_threads()
    interval = (grid.a, grid.b)
    profile = oscillation_profile(p, deltas_f, sample_count, interval=interval, max_workers=workers)
    estimate = estimate_holder(p, deltas_f, sample_count, interval=interval, max_workers=workers)
    header = ["delta", "m_max"]
    rows = [[d, m] for d, m in zip(deltas_f, profile)]
    summary = {
        "command": "holder",
        "alpha": estimate.alpha,
        "fit_residual": estimate.fit_residual,
        "delta_min": estimate.delta_range[0],
        "delta_max": estimate.delta_range[1],
    }
    if meta_alpha is not None:
        summary["theory_alpha"] = float(meta_alpha)
    return header, rows, summary


_DISPATCH = {
    "deriv": _cmd_deriv,
    "functional": _cmd_functional,
    "check-el": lambda cfg: _cmd_residual(cfg, "check-el"),
    "check-dbr": lambda cfg: _cmd_residual(cfg, "check-dbr"),
    "invariance": _cmd_invariance,
    "noether": _cmd_noether,
    "schrodinger": _cmd_schrodinger,
    "holder": _cmd_holder,
}


def run(config_path: str, overrides=()) -> int:
    """Execute one experiment config; write <prefix>.csv and <prefix>.summary.json."""
    try:
        cfg = _load_config(config_path, overrides)
        command = _field(cfg, "command", str, what=f"one of {', '.join(COMMANDS)}")
        if command not in COMMANDS:
            raise ValidationError(
                f'invalid field "command": expected one of {", ".join(COMMANDS)}, got {command!r}'
            )
        prefix = _field(cfg, "output", str, what="an output path prefix")
        header, rows, summary = _DISPATCH[command](cfg)
        _write_csv(prefix, header, rows)
        _write_summary(prefix, summary)
    except NumericalError as err:
        print(f"scalevar: numerical failure: {err}", file=sys.stderr)
        return 3
    except (ValidationError, OSError) as err:
        print(f"scalevar: {err}", file=sys.stderr)
        return 2
    except ScaleVarError as err:  # pragma: no cover - safety net
        print(f"scalevar: {err}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="scalevar",
        description="Scale-derivative toolkit: batch experiment runner",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)
    runp = sub.add_parser("run", help="execute one experiment config")
    runp.add_argument("config", help="path to a JSON experiment config")
    runp.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a dotted config key, e.g. --set scale.epsilon=0.002",
    )
    ns = ap.parse_args(argv)
    return run(ns.config, ns.overrides)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
