"""Acceptance suite: one test per criterion, each at its stated tolerance,
printing one pass/fail line (run with -s to see the lines on success)."""

import json
import math
import time

import numpy as np

from scalevar import (
    LagrangianSpec,
    Path,
    ScalarField,
    ScaleParams,
    SchrodingerProblem,
    SymmetrySpec,
    delta,
    dubois_reymond_residual,
    energy_constant,
    euler_lagrange_residual,
    integrate_trajectory,
    invariance_derivative,
    invariance_integrand_integral,
    kinetic_coefficient_identity_gap,
    make_grid,
    noether_constant,
    quantum_derivative,
    quantum_integral,
    sample,
    scale_derivative,
    scale_derivative_path,
    schrodinger_residual,
    weierstrass,
)
from scalevar.cli import run as cli_run
from scalevar.lagdsl import diff, evaluate, format_expr, free_variables, parse
from conftest import dyadic_sampled_path, sampled, ulps_apart

from test_lagdsl import _corpus, _random_bindings, _shifted


def _report(number, name, t0, budget):
    elapsed = time.perf_counter() - t0
    assert elapsed < budget, f"criterion {number} exceeded its {budget}s budget: {elapsed:.2f}s"
    print(f"ACCEPTANCE {number:02d} {name}: PASS ({elapsed:.2f}s)")


def test_acceptance_01_operator_algebra_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    for case in range(1000):
        p = dyadic_sampled_path(rng, n_nodes=9)
        q = dyadic_sampled_path(rng, n_nodes=9)
        g = p.grid
        k = int(rng.integers(2, 7))
        m = int(rng.integers(1, 3))
        t = g.node(k)
        eps = m * g.h
        dplus = delta(p, eps, +1, t)[0]
        dminus = delta(p, eps, -1, t)[0]
        # mu collapse: -i selects the forward quotient, +i the backward,
        # 0 the half-sum
        assert ulps_apart(scale_derivative(p, ScaleParams(eps, "-i"), t)[0], dplus) <= 4
        assert ulps_apart(scale_derivative(p, ScaleParams(eps, "i"), t)[0], dminus) <= 4
        assert ulps_apart(
            scale_derivative(p, ScaleParams(eps, "0"), t)[0], 0.5 * (dplus + dminus)
        ) <= 4
        # linearity on the shared stencil (dyadic scalars keep it exact)
        combo = Path.from_samples(g, 1.5 * p.values - 0.5 * q.values)
        sp = ScaleParams(eps, "1")
        lhs = scale_derivative(combo, sp, t)[0]
        rhs = 1.5 * scale_derivative(p, sp, t)[0] - 0.5 * scale_derivative(q, sp, t)[0]
        assert ulps_apart(lhs, rhs) <= 4
        # real/imaginary split
        pre = Path.from_samples(g, p.values.real.astype(complex))
        pim = Path.from_samples(g, p.values.imag.astype(complex))
        whole = scale_derivative(p, sp, t)[0]
        split = scale_derivative(pre, sp, t)[0] + 1j * scale_derivative(pim, sp, t)[0]
        assert ulps_apart(whole, split) <= 4
    _report(1, "operator algebra exact to <= 4 ulps on 1000 cases", t0, 1.0)


def test_acceptance_02_classical_limit():
    t0 = time.perf_counter()
    sine = Path.from_callable(np.sin, vectorized=True)
    report = quantum_derivative(sine, "1", t=0.5)
    assert report.converged
    assert abs(report.limit_estimate - math.cos(0.5)) < 1e-4
    square = Path.from_callable(lambda t: t * t)
    cube = Path.from_callable(lambda t: t**3)
    for p, exact in ((square, 1.0), (cube, 0.75)):
        rep = quantum_derivative(p, "1", t=0.5)
        assert rep.converged
        assert abs(rep.limit_estimate - exact) < 1e-8
    _report(2, "classical limit via the default eps sweep", t0, 1.0)


def test_acceptance_03_product_rule_defect_power_law():
    t0 = time.perf_counter()
    for alpha, beta in ((0.63, 0.63), (0.8, 0.5)):
        f = weierstrass(3.0**-alpha, 3.0, 1e-10)
        g = weierstrass(3.0**-beta, 3.0, 1e-10)
        epss = np.geomspace(1e-2, 1e-4, 9)
        ts = np.linspace(0.05, 0.95, 200)
        defects = []
        for eps in epss:
            fp, f0, fm = (f.at_many(ts + eps)[:, 0], f.at_many(ts)[:, 0], f.at_many(ts - eps)[:, 0])
            gp, g0, gm = (g.at_many(ts + eps)[:, 0], g.at_many(ts)[:, 0], g.at_many(ts - eps)[:, 0])

            def box(vp, v0, vm, mu=1.0):
                dp = (vp - v0) / eps
                dm = (v0 - vm) / eps
                return 0.5 * ((dp + dm) + 1j * mu * (dp - dm))

            lhs = box(fp * gp, f0 * g0, fm * gm)
            rhs = box(fp, f0, fm) * g0 + f0 * box(gp, g0, gm)
            defects.append(np.max(np.abs(lhs - rhs)))
        slope = np.polyfit(np.log(epss), np.log(defects), 1)[0]
        target = alpha + beta - 1.0
        assert abs(slope - target) < 0.2, (alpha, beta, slope)
    _report(3, "product-rule defect follows eps^(alpha+beta-1)", t0, 10.0)


def test_acceptance_04_endpoint_rule():
    t0 = time.perf_counter()
    grid = make_grid(0.0, 1.0, 1000, 0.001)
    sp = ScaleParams(0.001, "0")
    for fn, vectorized, span in ((lambda t: t * t, False, 1.0), (np.sin, True, math.sin(1.0))):
        p = sample(Path.from_callable(fn, vectorized=vectorized), grid)
        total = quantum_integral(scale_derivative_path(p, sp), grid)[0]
        assert abs(total - span) < 1e-3
    _report(4, "endpoint rule |integral(box p) - (p(1)-p(0))| < 1e-3", t0, 1.0)


def test_acceptance_05_composite_derivative():
    t0 = time.perf_counter()
    field = ScalarField.from_text("q1^2", 1)
    # smooth paths: agreement to 1e-10
    smooth = (
        Path.from_callable(lambda t: t * t),
        Path.from_callable(np.sin, vectorized=True),
        Path.from_callable(lambda t: t + 0.3),
    )
    from scalevar import composite_scale_derivative

    for p in smooth:
        squared = Path.from_callable(lambda ts, _p=p: _p.at_many(ts)[:, 0] ** 2, vectorized=True)
        for mu in ("0", "1"):
            sp = ScaleParams(1e-3, mu)
            for t in (0.25, 0.7):
                got = composite_scale_derivative(field, p, sp, t)
                want = scale_derivative(squared, sp, t)[0]
                assert abs(got - want) < 1e-10
    # rough path: 5 percent relative at eps = 1e-3, mu = 0
    w = weierstrass(0.5, 3.0, 1e-12)
    squared = Path.from_callable(lambda ts: w.at_many(ts)[:, 0] ** 2, vectorized=True)
    sp = ScaleParams(1e-3, "0")
    for t in np.linspace(0.1, 0.9, 9):
        got = composite_scale_derivative(field, w, sp, t)
        want = scale_derivative(squared, sp, t)[0]
        assert abs(got - want) <= 0.05 * max(1e-30, abs(want))
    _report(5, "composite rule matches the direct derivative", t0, 5.0)


def test_acceptance_06_extremal_residuals():
    t0 = time.perf_counter()
    grid = make_grid(0.0, 1.0, 2000, 0.004)
    sp = ScaleParams(1e-3, "0")
    osc = LagrangianSpec.from_text("0.5*v1^2 - 0.5*q1^2")
    p = sampled(np.cos, grid)
    assert euler_lagrange_residual(osc, p, sp).max_abs < 1e-3
    assert dubois_reymond_residual(osc, p, sp).max_abs < 1e-3
    free = LagrangianSpec.from_text("0.5*v1^2")
    p2 = sampled(lambda ts: (ts**2).astype(complex), grid)
    report = euler_lagrange_residual(free, p2, sp)
    assert abs(report.max_abs - 2.0) < 1e-3
    _report(6, "extremal and energy-balance residuals", t0, 2.0)


def test_acceptance_07_invariance_consistency():
    t0 = time.perf_counter()
    grid = make_grid(0.0, 1.0, 1000, 0.002)
    sp = ScaleParams(1e-3, "0")

    def path1(fn):
        return sampled(fn, grid)

    def path2(fn):
        return sampled(fn, grid, dim=2)

    free = LagrangianSpec.from_text("0.5*v1^2")
    osc = LagrangianSpec.from_text("0.5*v1^2 - 0.5*q1^2")
    cases = [
        (free, path1(lambda ts: ts.astype(complex)), SymmetrySpec.from_text("1", "0")),
        (free, path1(lambda ts: ts.astype(complex)), SymmetrySpec.from_text("0", "1")),
        (osc, path1(np.cos), SymmetrySpec.from_text("1", "0")),
        (osc, path1(np.cos), SymmetrySpec.from_text("0", "1")),
        (osc, path1(np.sin), SymmetrySpec.from_text("t", "q1")),
        (LagrangianSpec.from_text("q1*v1"), path1(lambda ts: ts.astype(complex)),
         SymmetrySpec.from_text("0", "1")),
        (LagrangianSpec.from_text("t*v1"), path1(lambda ts: (ts**2).astype(complex)),
         SymmetrySpec.from_text("1", "0")),
        (LagrangianSpec.from_text("0.5*v1^2 + q1"), path1(lambda ts: (ts**2).astype(complex)),
         SymmetrySpec.from_text("0", "1")),
        (LagrangianSpec.from_text("0.5*v1^2 + 0.5*v2^2", 2),
         path2(lambda ts: np.stack([ts, ts**2], axis=1).astype(complex)),
         SymmetrySpec.from_text("1", ["0", "0"], dim=2)),
        (LagrangianSpec.from_text("v1*v2 - q1*q2", 2),
         path2(lambda ts: np.stack([np.cos(ts), np.sin(ts)], axis=1)),
         SymmetrySpec.from_text("q2", ["q1", "t"], dim=2)),
    ]
    assert len(cases) == 10
    for Lg, p, sym in cases:
        a = invariance_derivative(Lg, p, sym, sp)
        b = invariance_integrand_integral(Lg, p, sym, sp)
        assert abs(a - b) < 1e-6, (format_expr(Lg.L), abs(a - b))
    _report(7, "invariance derivative equals the first-order integral", t0, 5.0)


def test_acceptance_08_conserved_quantities():
    t0 = time.perf_counter()
    grid = make_grid(0.0, 1.0, 1000, 0.01)
    sp = ScaleParams(1e-3, "0")
    free = LagrangianSpec.from_text("0.5*v1^2")
    p = sampled(lambda ts: ts.astype(complex), grid)
    energy = noether_constant(free, p, SymmetrySpec.from_text("1", "0"), sp)
    assert energy.drift < 1e-12
    assert abs(energy.mean + 0.5) < 1e-12
    momentum = noether_constant(free, p, SymmetrySpec.from_text("0", "1"), sp)
    assert momentum.drift < 1e-12
    assert abs(momentum.mean - 1.0) < 1e-12
    osc_grid = make_grid(0.0, 1.0, 2000, 0.004)
    osc = LagrangianSpec.from_text("0.5*v1^2 - 0.5*q1^2")
    report = noether_constant(osc, sampled(np.cos, osc_grid), SymmetrySpec.from_text("1", "0"), sp)
    assert report.drift < 1e-3
    _report(8, "conserved quantities: drift within tolerance", t0, 2.0)


def test_acceptance_09_schrodinger_application():
    t0 = time.perf_counter()
    grid = make_grid(0.0, 1.0, 1000, 0.002)
    sp = ScaleParams(1e-3, "0")
    probes_t = np.repeat(np.linspace(0.0, 1.0, 9), 9)
    probes_q = np.tile(np.linspace(-2.0, 2.0, 9), 9)

    plane = SchrodingerProblem("exp(i*(2*q1 - 2*t))", "0", 1.0, 1.0)
    assert schrodinger_residual(plane, probes_t, probes_q).max_abs < 1e-12
    traj = integrate_trajectory(plane, [0.0], grid)
    report = energy_constant(plane, traj, sp)
    assert report.theorem.drift < 1e-4
    assert abs(report.theorem.mean + 2.0) < 1e-6  # -hbar^2 k^2 / (2m) at k = 2

    gauss = SchrodingerProblem("exp(-q1^2/2)*exp(-i*t/2)", "0.5*q1^2", 1.0, 1.0)
    assert schrodinger_residual(gauss, probes_t, probes_q).max_abs < 1e-12
    traj2 = integrate_trajectory(gauss, [1.0], grid)
    report2 = energy_constant(gauss, traj2, sp)
    assert report2.theorem.drift < 1e-4
    assert abs(report2.theorem.mean) < 1e-5  # kinetic and potential parts cancel

    assert kinetic_coefficient_identity_gap(1.0, 1.0) <= 1.0
    _report(9, "wavefunction trajectories conserve the theorem-form energy", t0, 5.0)


def test_acceptance_10_dsl_gradient_and_roundtrip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(23)
    h = 1e-5
    texts = _corpus(count=20, seed=5)
    assert len(texts) == 20
    for text in texts:
        ast = parse(text, 2)
        # print/parse idempotence
        assert parse(format_expr(ast), 2) == ast
        for var in ("t", "q1", "v1", "q2", "v2"):
            if var not in free_variables(ast):
                continue
            d = diff(ast, var)
            b = _random_bindings(rng)
            sym = evaluate(d, b)
            fd = (evaluate(ast, _shifted(b, var, h)) - evaluate(ast, _shifted(b, var, -h))) / (
                2 * h
            )
            assert abs(sym - fd) < 1e-6 * max(1.0, abs(sym))
    _report(10, "symbolic gradients match finite differences", t0, 1.0)


def test_acceptance_11_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    import pathlib

    config_dir = pathlib.Path(__file__).resolve().parent.parent / "configs"
    configs = sorted(config_dir.glob("*.json"))
    assert configs
    for config in configs:
        out1 = tmp_path / "r1" / config.stem
        out2 = tmp_path / "r2" / config.stem
        assert cli_run(str(config), [f"output={out1}"]) == 0
        assert cli_run(str(config), [f"output={out2}"]) == 0
        for suffix in (".csv", ".summary.json"):
            b1 = (out1.parent / (out1.name + suffix)).read_bytes()
            b2 = (out2.parent / (out2.name + suffix)).read_bytes()
            assert b1 == b2, (config.stem, suffix)
    # schema violation: exit 2 and the offending field named
    broken = json.loads((config_dir / "noether_free_particle.json").read_text())
    broken["scale"]["mu"] = "2"
    bad_path = tmp_path / "bad.json"
    bad_path.write_text(json.dumps(broken))
    import contextlib
    import io

    err = io.StringIO()
    with contextlib.redirect_stderr(err):
        code = cli_run(str(bad_path), [f"output={tmp_path / 'bad'}"])
    assert code == 2
    assert "scale.mu" in err.getvalue()
    _report(11, "CLI determinism and schema validation", t0, 60.0)
