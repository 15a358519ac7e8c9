"""Scale calculus of variations: action values, extremal residuals, invariance
checks and conserved-quantity reports.

For a Lagrangian L(t, q, v) with v = box q (the scale derivative of the path):

    extremal residual        r = dL/dq - box(dL/dv)
    energy-balance residual  r = box(L - dL/dv . v) - dL/dt
    conserved quantity       C = dL/dv . xi + (L - dL/dv . v) tau

under a generator (tau(t, q), xi(t, q)).  Residuals are reported on the
window [a + eps, b - eps]: the outer scale derivative consumes one stencil of
data on each side and no boundary values are fabricated.  All checks take a
candidate path as data; nothing here solves the variational problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridError, NumericalError, ValidationError
from .funcspace import Path, TimeGrid
from .lagdsl import Bindings, diff, evaluate, free_variables, parse, _VAR_RE
from .scaleops import ScaleParams, scale_derivative_path, trapezoid

__all__ = [
    "LagrangianSpec",
    "SymmetrySpec",
    "ResidualReport",
    "NoetherReport",
    "evaluate_functional",
    "functional_integrand",
    "euler_lagrange_residual",
    "dubois_reymond_residual",
    "invariance_derivative",
    "invariance_integrand_integral",
    "noether_constant",
]


@dataclass(frozen=True)
class LagrangianSpec:
    """Lagrangian L(t, q, v) with its symbolic partials dL/dt, dL/dq, dL/dv."""

    L: object
    dL_dt: object
    grad_q: tuple
    grad_v: tuple
    dim: int
    params: dict

    @classmethod
    def from_text(cls, text: str, dim: int = 1, params=None) -> "LagrangianSpec":
        params = dict(params or {})
        L = parse(text, dim, param_names=tuple(params))
        return cls(
            L=L,
            dL_dt=diff(L, "t"),
            grad_q=tuple(diff(L, f"q{k + 1}") for k in range(dim)),
            grad_v=tuple(diff(L, f"v{k + 1}") for k in range(dim)),
            dim=int(dim),
            params=params,
        )


@dataclass(frozen=True)
class SymmetrySpec:
    """Generator pair (tau(t, q), xi(t, q)) with the group-parameter step.

    tau rescales time, xi displaces the path; neither may reference velocity
    variables.  s_step is the central-difference step in the group parameter.
    """

    tau: object
    xi: tuple
    dim: int
    params: dict
    s_step: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.s_step <= 0.1:
            raise ValidationError(f"s_step must lie in (0, 0.1], got {self.s_step}")
        if len(self.xi) != self.dim:
            raise ValidationError(f"xi needs {self.dim} components, got {len(self.xi)}")
        for e in (self.tau, *self.xi):
            if any(n.startswith("v") and _VAR_RE.match(n) for n in free_variables(e)):
                raise ValidationError("symmetry generators may not reference velocity variables")

    @classmethod
    def from_text(cls, tau_text: str, xi_texts, dim: int = 1, params=None, s_step: float = 1e-4):
        params = dict(params or {})
        if isinstance(xi_texts, str):
            xi_texts = [xi_texts]
        return cls(
            tau=parse(tau_text, dim, param_names=tuple(params)),
            xi=tuple(parse(x, dim, param_names=tuple(params)) for x in xi_texts),
            dim=int(dim),
            params=params,
            s_step=float(s_step),
        )


@dataclass(frozen=True)
class ResidualReport:
    """Pointwise residual samples with max |r| and the h-weighted l2 norm."""

    node_times: np.ndarray
    residuals: np.ndarray
    max_abs: float
    l2: float


def _residual_report(ts: np.ndarray, res: np.ndarray, weight: float) -> ResidualReport:
    res = np.asarray(res, dtype=np.complex128)
    mags = np.abs(res)
    return ResidualReport(
        node_times=np.asarray(ts, dtype=float),
        residuals=res,
        max_abs=float(mags.max()),
        l2=float(math.sqrt(weight * float((mags**2).sum()))),
    )


@dataclass(frozen=True)
class NoetherReport:
    """Samples of a candidate conserved quantity C(t) with mean and drift.

    drift = max |C - mean| / max(1, |mean|), so zero-mean constants do not
    divide by zero.
    """

    node_times: np.ndarray
    constant_samples: np.ndarray
    mean: complex
    drift: float


def _noether_report(ts: np.ndarray, samples: np.ndarray) -> NoetherReport:
    samples = np.asarray(samples, dtype=np.complex128)
    mean = complex(samples.mean())
    drift = float(np.max(np.abs(samples - mean)) / max(1.0, abs(mean)))
    return NoetherReport(np.asarray(ts, dtype=float), samples, mean, drift)


# ---------------------------------------------------------------------------
# Shared plumbing


def _sampled_grid(p: Path) -> TimeGrid:
    if not p.is_sampled:
        raise ValidationError(
            "variational checks need a sampled path; use funcspace.sample(path, grid)"
        )
    return p.grid


def _check_dim(spec_dim: int, p: Path) -> None:
    if spec_dim != p.dim:
        raise ValidationError(f"dimension mismatch: spec has d={spec_dim}, path has d={p.dim}")


def _restrict(p: Path, target: TimeGrid) -> np.ndarray:
    """Samples of p on the node set of a narrower grid with the same core."""
    g = p.grid
    off = g.pad_steps - target.pad_steps
    if off < 0 or (g.a, g.b, g.n) != (target.a, target.b, target.n):
        raise GridError("incompatible grids")
    return p.values[off : off + target.num_nodes]


def _eval_samples(expr, params, ts, qvals, vvals=None) -> np.ndarray:
    """Evaluate an expression on per-node arrays; constants broadcast to (N,)."""
    b = Bindings(
        t=ts,
        q=tuple(np.asarray(qvals, dtype=np.complex128).T),
        v=() if vvals is None else tuple(np.asarray(vvals, dtype=np.complex128).T),
        params=params,
    )
    out = evaluate(expr, b)
    n = len(qvals)
    return np.array(np.broadcast_to(np.asarray(out, dtype=np.complex128), (n,)))


def _core_state(Lg: LagrangianSpec, p: Path, sp: ScaleParams):
    """Times, positions and velocities on the core window [a, b]."""
    v_path = scale_derivative_path(p, sp)
    g1 = v_path.grid
    core = g1.core
    ts = g1.nodes()[core]
    qv = _restrict(p, g1)[core]
    vv = v_path.values[core]
    return g1, ts, qv, vv


# ---------------------------------------------------------------------------
# Operations


def functional_integrand(Lg: LagrangianSpec, p: Path, sp: ScaleParams):
    """Per-node samples of L(t, q, box q) on the core window [a, b]."""
    g = _sampled_grid(p)
    _check_dim(Lg.dim, p)
    _, ts, qv, vv = _core_state(Lg, p, sp)
    return ts, _eval_samples(Lg.L, Lg.params, ts, qv, vv), g.h


def evaluate_functional(Lg: LagrangianSpec, p: Path, sp: ScaleParams) -> complex:
    """Trapezoid value of the action  integral L(t, q, box q) dt  over [a, b]."""
    _, integrand, h = functional_integrand(Lg, p, sp)
    return complex(trapezoid(integrand, h))


def _boxed_samples_report(p: Path, sp: ScaleParams, inner: np.ndarray, rhs_fn):
    """Apply an outer scale derivative to per-node samples and report the
    residual box(inner) - rhs on the window [a + eps, b - eps]."""
    g = p.grid
    m = g.steps_of(sp.epsilon)
    v_path = scale_derivative_path(p, sp)
    g1 = v_path.grid
    inner_path = Path.from_samples(g1, inner)
    outer = scale_derivative_path(inner_path, sp)
    g2 = outer.grid
    ts2 = g2.nodes()
    qv2 = _restrict(p, g2)
    vv2 = _restrict(v_path, g2)
    res = outer.values - rhs_fn(ts2, qv2, vv2)
    if g2.n <= 2 * m:
        raise GridError("grid too coarse: the window [a+eps, b-eps] is empty")
    w = slice(g2.pad_steps + m, g2.pad_steps + g2.n - m + 1)
    res_w = res[w]
    if res_w.shape[1] == 1:
        res_w = res_w[:, 0]
    return _residual_report(ts2[w], res_w, g.h)


def euler_lagrange_residual(Lg: LagrangianSpec, p: Path, sp: ScaleParams) -> ResidualReport:
    """Residual of the extremal condition  dL/dq - box(dL/dv) = 0.

    The momentum dL/dv is sampled along the path and differentiated as a
    path itself, so the input needs pad >= 2*eps.
    """
    g = _sampled_grid(p)
    _check_dim(Lg.dim, p)
    m = g.steps_of(sp.epsilon)
    if g.pad_steps < 2 * m:
        raise GridError(
            f"padding {g.pad!r} is smaller than 2*epsilon={2 * sp.epsilon!r} "
            "(the outer derivative of the momentum consumes one stencil per side)"
        )
    v_path = scale_derivative_path(p, sp)
    g1 = v_path.grid
    ts1 = g1.nodes()
    qv1 = _restrict(p, g1)
    vv1 = v_path.values
    momentum = np.stack(
        [_eval_samples(Lg.grad_v[k], Lg.params, ts1, qv1, vv1) for k in range(Lg.dim)], axis=1
    )

    def rhs(ts, qv, vv):
        return np.stack(
            [_eval_samples(Lg.grad_q[k], Lg.params, ts, qv, vv) for k in range(Lg.dim)], axis=1
        )

    # _boxed_samples_report yields box(momentum) - dL/dq; flip to dL/dq - box(momentum)
    report = _boxed_samples_report(p, sp, momentum, rhs)
    return _residual_report(report.node_times, -report.residuals, g.h)


def dubois_reymond_residual(Lg: LagrangianSpec, p: Path, sp: ScaleParams) -> ResidualReport:
    """Residual of the energy balance  box(L - dL/dv . v) - dL/dt = 0."""
    g = _sampled_grid(p)
    _check_dim(Lg.dim, p)
    m = g.steps_of(sp.epsilon)
    if g.pad_steps < 2 * m:
        raise GridError(
            f"padding {g.pad!r} is smaller than 2*epsilon={2 * sp.epsilon!r} "
            "(the outer derivative of the energy consumes one stencil per side)"
        )
    v_path = scale_derivative_path(p, sp)
    g1 = v_path.grid
    ts1 = g1.nodes()
    qv1 = _restrict(p, g1)
    vv1 = v_path.values
    lvals = _eval_samples(Lg.L, Lg.params, ts1, qv1, vv1)
    momentum_dot_v = np.zeros_like(lvals)
    for k in range(Lg.dim):
        momentum_dot_v += _eval_samples(Lg.grad_v[k], Lg.params, ts1, qv1, vv1) * vv1[:, k]
    energy = lvals - momentum_dot_v

    def rhs(ts, qv, vv):
        return _eval_samples(Lg.dL_dt, Lg.params, ts, qv, vv)[:, None]

    return _boxed_samples_report(p, sp, energy[:, None], rhs)


def _generator_state(Lg: LagrangianSpec, p: Path, sym: SymmetrySpec, sp: ScaleParams):
    """Core-window samples of tau, xi and their scale derivatives along the path."""
    g = _sampled_grid(p)
    _check_dim(Lg.dim, p)
    if sym.dim != p.dim:
        raise ValidationError(f"dimension mismatch: symmetry has d={sym.dim}, path has d={p.dim}")
    ts_all = g.nodes()
    qv_all = p.values
    tau_all = _eval_samples(sym.tau, sym.params, ts_all, qv_all)
    xi_all = np.stack(
        [_eval_samples(x, sym.params, ts_all, qv_all) for x in sym.xi], axis=1
    )
    g1, ts, qv, vv = _core_state(Lg, p, sp)
    m = g.pad_steps - g1.pad_steps
    core = g1.core
    tau = tau_all[m:-m][core]
    xi = xi_all[m:-m][core]
    dtau = scale_derivative_path(Path.from_samples(g, tau_all), sp).values[:, 0][core]
    dxi = scale_derivative_path(Path.from_samples(g, xi_all), sp).values[core]
    return g, ts, qv, vv, tau, xi, dtau, dxi


def invariance_derivative(
    Lg: LagrangianSpec, p: Path, sym: SymmetrySpec, sp: ScaleParams
) -> complex:
    """Central-difference d/ds at s = 0 of the generator-deformed action.

    The deformed action at group parameter s integrates
    L(t + s tau, q + s xi, (v + s box xi)/(1 + s box tau)) (1 + s box tau);
    box tau and box xi are scale derivatives of the generators composed with
    the path, consistent with the operator semantics used everywhere else.
    """
    g, ts, qv, vv, tau, xi, dtau, dxi = _generator_state(Lg, p, sym, sp)

    def action(s: float) -> complex:
        den = 1.0 + s * dtau
        if float(np.min(np.abs(den))) < 1e-6:
            raise NumericalError(
                "time deformation degenerate: |1 + s*box(tau)| < 1e-6 at a node"
            )
        b = Bindings(
            t=ts + s * tau,
            q=tuple((qv + s * xi).T),
            v=tuple(((vv + s * dxi) / den[:, None]).T),
            params=Lg.params,
        )
        integrand = np.broadcast_to(
            np.asarray(evaluate(Lg.L, b), dtype=np.complex128), ts.shape
        ) * den
        return complex(trapezoid(integrand, g.h))

    s = sym.s_step
    return (action(+s) - action(-s)) / (2.0 * s)


def _invariance_integrand(Lg: LagrangianSpec, p: Path, sym: SymmetrySpec, sp: ScaleParams):
    """First-order invariance integrand sampled on the core window:
    dL/dt tau + dL/dq . xi + dL/dv . (box xi - v box tau) + L box tau."""
    g, ts, qv, vv, tau, xi, dtau, dxi = _generator_state(Lg, p, sym, sp)
    lvals = _eval_samples(Lg.L, Lg.params, ts, qv, vv)
    out = _eval_samples(Lg.dL_dt, Lg.params, ts, qv, vv) * tau + lvals * dtau
    for k in range(Lg.dim):
        out += _eval_samples(Lg.grad_q[k], Lg.params, ts, qv, vv) * xi[:, k]
        out += _eval_samples(Lg.grad_v[k], Lg.params, ts, qv, vv) * (
            dxi[:, k] - vv[:, k] * dtau
        )
    return ts, out, g.h


def invariance_integrand_integral(
    Lg: LagrangianSpec, p: Path, sym: SymmetrySpec, sp: ScaleParams
) -> complex:
    """Trapezoid value of the first-order invariance integrand over [a, b].

    Agrees with invariance_derivative to the group-parameter step squared;
    a nonzero value flags a generator the action is not invariant under.
    """
    _, integrand, h = _invariance_integrand(Lg, p, sym, sp)
    return complex(trapezoid(integrand, h))


def noether_constant(
    Lg: LagrangianSpec, p: Path, sym: SymmetrySpec, sp: ScaleParams
) -> NoetherReport:
    """Candidate conserved quantity C = dL/dv . xi + (L - dL/dv . v) tau.

    Sampled on the core window; the drift statistic measures constancy.  The
    momentum term carries xi, the energy term carries tau.
    """
    g, ts, qv, vv, tau, xi, _, _ = _generator_state(Lg, p, sym, sp)
    lvals = _eval_samples(Lg.L, Lg.params, ts, qv, vv)
    momentum = np.stack(
        [_eval_samples(Lg.grad_v[k], Lg.params, ts, qv, vv) for k in range(Lg.dim)], axis=1
    )
    samples = (momentum * xi).sum(axis=1) + (lvals - (momentum * vv).sum(axis=1)) * tau
    return _noether_report(ts, samples)
