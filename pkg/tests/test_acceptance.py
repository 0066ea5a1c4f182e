"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math

import numpy as np

from conftest import (
    HALF_LINE,
    PI,
    half_line_exhaustion,
    hardy_exhaustion,
    hardy_supercritical_exhaustion,
    interval_system,
    real_line_exhaustion,
    record,
    square_system,
)
from critlab.criticality import (
    CRITICAL,
    SUBCRITICAL,
    SUPERCRITICAL,
    classify,
    hardy_weight,
    null_sequence,
)
from critlab.discretize import assemble
from critlab.geometry import DomainSpec, ExhaustionSpec, coordinate_is, make_exhaustion
from critlab.green import check_green_symmetry, green_bounded
from critlab.operator import (
    OperatorSpec,
    RobinData,
    drift,
    ground_state_transform_matrices,
    hardy,
    laplace,
    shifted,
)
from critlab.oracle import Oracle1DProblem, dense_reference, eig1d_transcendental
from critlab.spectral import (
    check_max_principle,
    lambda0_exhaustion,
    principal_eigen,
    protter_weinberger,
    rayleigh_lambda,
)

SIZES = (125, 250, 500, 1000)
LEFT = coordinate_is(0.0)


def _eigen_errors(a, b, op, robin, exact):
    return [abs(principal_eigen(interval_system(a, b, n, op=op, robin=robin)).lambda_c - exact)
            for n in SIZES]


def test_criterion_01_principal_eigenvalues():
    cases = {
        "D/D (0,pi)": (0.0, PI, laplace(), None,
                       eig1d_transcendental(Oracle1DProblem((0.0, PI)))),
        "N/D (0,1)": (0.0, 1.0, laplace(), LEFT,
                      eig1d_transcendental(Oracle1DProblem((0.0, 1.0), left=("R", 0.0)))),
        "R(1)/D (0,1)": (0.0, 1.0, OperatorSpec(robin=RobinData(1.0, 1.0)), LEFT,
                         eig1d_transcendental(Oracle1DProblem((0.0, 1.0), left=("R", 1.0)))),
    }
    ok, parts = True, []
    for name, (a, b, op, robin, exact) in cases.items():
        errs = _eigen_errors(a, b, op, robin, exact)
        ratios = [e0 / e1 for e0, e1 in zip(errs[:-1], errs[1:])]
        good = errs[-1] <= 1e-3 and all(3.0 <= r <= 5.0 for r in ratios)
        ok &= good
        parts.append(f"{name}: err(1000)={errs[-1]:.2e} ratios={'/'.join(f'{r:.2f}' for r in ratios)}")
    assert record(1, ok, "; ".join(parts))


def test_criterion_02_separable_square():
    h = PI / 64
    dd = principal_eigen(square_system(PI, h)).lambda_c
    nd = principal_eigen(square_system(PI, h, robin=LEFT)).lambda_c
    ok = abs(dd - 2.0) <= 0.02 and abs(nd - 1.25) <= 0.0125
    assert record(2, ok, f"all-Dirichlet {dd:.5f} (target 2), Neumann on x=0 {nd:.5f} (target 1.25)")


def test_criterion_03_gamma_and_lambda():
    symmetric = {
        "D/D laplace": interval_system(0.0, PI, 400),
        "Robin laplace": interval_system(0.0, 1.0, 400, op=OperatorSpec(robin=RobinData(1.0, 1.0)),
                                         robin=LEFT),
        "hardy(0.25) on (0.5,4)": interval_system(0.5, 4.0, 400, op=hardy(0.25)),
        "square": square_system(PI, PI / 24, robin=LEFT),
    }
    ok, parts = True, []
    for name, s in symmetric.items():
        gap = abs(rayleigh_lambda(s) - principal_eigen(s).lambda_c)
        ok &= gap <= 1e-6
        parts.append(f"{name} |Lambda-lambda_c|={gap:.1e}")
    s = interval_system(0.0, PI, 400, op=drift([1.0]))
    lam, Lam = principal_eigen(s).lambda_c, rayleigh_lambda(s)
    ok &= Lam <= lam - 0.01
    parts.append(f"drift: Lambda={Lam:.4f} lambda_c={lam:.4f}")
    assert record(3, ok, "; ".join(parts))


def test_criterion_04_maximum_principle():
    systems = {
        "1D (0,pi)": interval_system(0.0, PI, 100),
        "1D Robin (0,1)": interval_system(0.0, 1.0, 100, op=OperatorSpec(robin=RobinData(1.0, 2.0)),
                                          robin=LEFT),
        "criss-cross square": square_system(PI, PI / 12),
        "criss-cross square, Neumann x=0": square_system(PI, PI / 12, robin=LEFT),
    }
    ok, parts = True, []
    for name, s in systems.items():
        ev = np.sort(dense_reference(s).eigenvalues.real)
        below = check_max_principle(s, 0.0, trials=100)
        mid = 0.5 * (ev[0] + ev[1])
        above = check_max_principle(s, mid, trials=100)
        good = below.holds and below.worst_ratio >= -1e-8 and not above.holds
        ok &= good
        parts.append(f"{name}: holds@0={below.holds} witness@{mid:.3f}={not above.holds}")
    assert record(4, ok, "; ".join(parts))


def test_criterion_05_green_functions():
    n = 20
    grid = [i / n for i in range(1, n)]
    dd = interval_system(0.0, 1.0, n)
    nd = interval_system(0.0, 1.0, n, robin=LEFT)
    err_dd = err_nd = 0.0
    for y in grid:
        gd = green_bounded(dd, y)
        gn = green_bounded(nd, y)
        x = np.array(grid)
        err_dd = max(err_dd, np.max(np.abs(gd(x[:, None]) - np.minimum(x, y) * (1 - np.maximum(x, y)))))
        err_nd = max(err_nd, np.max(np.abs(gn(x[:, None]) - (1 - np.maximum(x, y)))))
    s = interval_system(0.0, 1.0, 50, op=drift([1.0]))
    sym = max(check_green_symmetry(s, x, y) for x in (0.2, 0.5) for y in (0.3, 0.74, 0.9))
    sq = square_system(1.0, 0.1, op=drift([1.0, -0.5], dim=2))
    sym = max(sym, check_green_symmetry(sq, (0.3, 0.4), (0.7, 0.6)))
    ok = err_dd <= 1e-10 and err_nd <= 1e-10 and sym <= 1e-10
    assert record(5, ok, f"D/D kernel err {err_dd:.1e}, N/D kernel err {err_nd:.1e}, "
                         f"adjoint symmetry {sym:.1e}")


def test_criterion_06_exhaustion_dichotomy():
    half = classify(half_line_exhaustion(), laplace(), 8, 1.0, 2.0, 2.0)
    g = half.dichotomy.g_values
    probes = np.linspace(-4.0, 4.0, 33)
    line = classify(real_line_exhaustion(), laplace(), 8, 0.0, 1.0, 1.0, probes=probes)
    prof = line.profile(probes[:, None])
    dev = float(np.max(np.abs(prof - 1.0)))
    monotone = all(np.all(np.diff(t.dichotomy.g_values) >= 0) for t in (half, line))
    ok = (half.verdict == SUBCRITICAL and abs(g[-1] - 1.0) <= 0.02
          and line.verdict == CRITICAL and dev <= 0.02 and monotone)
    assert record(6, ok, f"half-line {half.verdict} G_8(1,2)={g[-1]:.4f}; "
                         f"R {line.verdict} max|u-1| on |x|<=4 = {dev:.4f}; monotone={monotone}")


def test_criterion_07_hardy_triple():
    probes = np.linspace(1.0, 4.0, 31)
    sub = classify(hardy_exhaustion(), hardy(0.16), 8, 1.0, 2.0, 2.0, probes=probes)
    crit = classify(hardy_exhaustion(), hardy(0.25), 8, 1.0, 2.0, 2.0, probes=probes)
    r = crit.profile(probes[:, None]) / np.sqrt(probes) if crit.profile is not None else np.nan
    spread = float(np.max(r) / np.min(r) - 1.0)
    sup = classify(hardy_supercritical_exhaustion(), hardy(1.0), 8, 1.0, 2.0, 2.0)
    neg = sup.lambda_trace.levels[-1]
    ok = (sub.verdict == SUBCRITICAL and crit.verdict == CRITICAL and spread <= 0.10
          and sup.verdict == SUPERCRITICAL and neg[0] <= 8 and neg[1] < 0)
    assert record(7, ok, f"mu=0.16 {sub.verdict}; mu=0.25 {crit.verdict} "
                         f"(profile/sqrt(x) spread {spread:.3f}); mu=1 {sup.verdict} "
                         f"(lambda_c={neg[1]:.2e} at k={neg[0]})")


def test_criterion_08_hardy_weight_pipeline():
    h = 1.0 / 64
    ex = ExhaustionSpec(HALF_LINE, lambda k: ((0.0, 2.0 ** (k + 1)),), lambda k: h)
    rechecks, errs = [], []
    for k in range(1, 9):
        s = assemble(make_exhaustion(ex, k), laplace())
        x = s.free_coordinates()[:, 0]
        W = hardy_weight(np.ones(s.n_free), x, s)
        rechecks.append(W.recheck_lambda)
        if k == 8:
            pts = np.array([1.0, 2.0, 4.0])
            errs = np.abs(W(pts[:, None]) - 1.0 / (4 * pts ** 2))
    ok = bool(np.all(errs <= h)) and min(rechecks) >= -1e-6
    assert record(8, ok, f"|W - 1/(4x^2)| at 1,2,4 = {', '.join(f'{e:.1e}' for e in errs)}; "
                         f"min recheck lambda_c = {min(rechecks):.2e}")


def test_criterion_09_null_sequences():
    crit = {
        "R, O=(-1,1)": null_sequence(real_line_exhaustion(), laplace(), (-1.0, 1.0), 8),
        "hardy(0.25), O=(1,2)": null_sequence(hardy_exhaustion(), hardy(0.25), (1.0, 2.0), 8),
    }
    sub = {
        "half-line, O=(1,2)": null_sequence(half_line_exhaustion(), laplace(), (1.0, 2.0), 8),
        "hardy(0.16), O=(1,2)": null_sequence(hardy_exhaustion(), hardy(0.16), (1.0, 2.0), 8),
    }
    ok, parts = True, []
    for name, t in crit.items():
        ok &= t.decreasing and t.minima[-1] <= 0.15
        parts.append(f"{name} final C_O={t.minima[-1]:.4f} decreasing={t.decreasing}")
    for name, t in sub.items():
        ok &= min(t.minima) >= 0.1
        parts.append(f"{name} min C_O={min(t.minima):.4f}")
    assert record(9, ok, "; ".join(parts))


def test_criterion_10_ground_state_transform():
    s = interval_system(0.0, PI, 200, op=drift([0.5]))
    pair = principal_eigen(s)
    crit_sys = assemble(s.mesh, shifted(s.spec, pair.lambda_c))
    u = pair.u_c.values
    t = ground_state_transform_matrices(crit_sys, u)
    D = np.diag(u)
    K = crit_sys.K.toarray()
    cong = np.max(np.abs(t.K.toarray() - D @ K @ D)) / np.max(np.abs(D @ K @ D))
    Ku = np.linalg.norm(K @ u) / (np.linalg.norm(K, 1) * np.linalg.norm(u))
    Ku1 = np.linalg.norm(t.K @ np.ones(s.n_free)) / (np.abs(t.K).sum(axis=1).max() * math.sqrt(s.n_free))
    rng = np.random.default_rng(7)
    worst = 0.0
    for base, w in ((s, u), (s, rng.random(s.n_free) + 0.5),
                    (square_system(1.0, 0.1), None)):
        weight = w if w is not None else rng.random(base.n_free) + 0.5
        tb = ground_state_transform_matrices(base, weight)
        for y in ((0.8,), (2.0,)) if base.mesh.dim == 1 else ((0.3, 0.6), (0.5, 0.5)):
            G = green_bounded(base, y)
            Gu = green_bounded(tb, y)
            py = base.free_position(G.pole_vertex)
            expect = G.values.values * weight[py] / weight
            worst = max(worst, float(np.max(np.abs(Gu.values.values - expect) / np.abs(expect))))
    ok = cong <= 1e-12 and Ku1 <= 1e-12 and worst <= 1e-10
    assert record(10, ok, f"DKD congruence {cong:.1e}; |K u|={Ku:.1e} -> |K^u 1|={Ku1:.1e}; "
                          f"G^u identity rel err {worst:.1e}")


def test_criterion_11_monotonicity():
    quad = DomainSpec.make_halfspaces([(0.0, -1.0, 0.0)], robin=lambda p: True)
    exhaustions = {
        "half-line": (half_line_exhaustion(), laplace(), 8),
        "R": (real_line_exhaustion(), laplace(), 8),
        "hardy(0.16)": (hardy_exhaustion(), hardy(0.16), 8),
        "half-plane Robin": (ExhaustionSpec(quad, lambda k: ((-k, k), (-k, k)), lambda k: 0.25),
                             laplace(2), 4),
    }
    ok, parts = True, []
    for name, (ex, op, k_max) in exhaustions.items():
        vals = lambda0_exhaustion(ex, op, k_max).values
        strict = all(b < a for a, b in zip(vals[:-1], vals[1:]))
        ok &= strict
        parts.append(f"{name} strict={strict}")
    worst = math.inf
    rng = np.random.default_rng(3)
    for base in (interval_system(0.0, 1.0, 60), square_system(1.0, 0.125, robin=LEFT)):
        for _ in range(3):
            a = rng.random(2)
            v1 = lambda x, a=a: a[0] * (1 + np.sin(3 * x[:, 0])) / 2
            v2 = lambda x, a=a, v1=v1: v1(x) + a[1] * (1 + np.cos(5 * x[:, 0])) / 2
            G1 = np.linalg.inv(assemble(base.mesh, base.spec.with_potential(v1)).K.toarray())
            G2 = np.linalg.inv(assemble(base.mesh, base.spec.with_potential(v2)).K.toarray())
            worst = min(worst, float(np.min(G1 - G2)) / float(np.max(G1)))
    ok &= worst >= -1e-12
    parts.append(f"min(G_V1 - G_V2)/max G = {worst:.1e}")
    assert record(11, ok, "; ".join(parts))


def test_criterion_12_protter_weinberger():
    systems = {
        "D/D": interval_system(0.0, PI, 200),
        "drift": interval_system(0.0, PI, 200, op=drift([1.0])),
        "square Robin": square_system(PI, PI / 20, robin=LEFT),
    }
    rng = np.random.default_rng(2024)
    ok, parts = True, []
    for name, s in systems.items():
        pair = principal_eigen(s)
        at = protter_weinberger(s, pair.u_c)
        # ten unstructured samples and ten multiplicative perturbations of u_c
        samples = [rng.random(s.n_free) + 1e-3 for _ in range(10)]
        samples += [pair.u_c.values * np.exp(0.05 * rng.standard_normal(s.n_free))
                    for _ in range(10)]
        worst = max(protter_weinberger(s, u) for u in samples)
        good = abs(at - pair.lambda_c) <= 1e-6 and worst <= pair.lambda_c + 1e-8
        ok &= good
        parts.append(f"{name}: |pw(u_c)-lambda_c|={abs(at - pair.lambda_c):.1e}, "
                     f"max pw(random)-lambda_c={worst - pair.lambda_c:.2e}")
    assert record(12, ok, "; ".join(parts))
