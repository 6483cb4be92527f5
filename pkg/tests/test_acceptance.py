"""End-to-end acceptance criteria, one test each.

Every test records a single PASS/FAIL line (criterion number, verdict, the
measured quantities and the wall time) in ``RESULTS``; ``conftest.py`` prints
them in the terminal summary.  Tolerances are the acceptance tolerances.
"""

import math
import random
import time
from fractions import Fraction

import numpy as np

from hessosc import BumpSpec, PolyPhase
from hessosc.decayscan import (
    BoxClass,
    active_counts,
    classify_box,
    classify_boxes,
    counterexample_profile,
    fit_decay,
    rescale_check,
    scan,
)
from hessosc.foldcut import numeric_f2, reduced_expansion0, reduced_f2, trace_curve
from hessosc.geomschrod import build_box, expansion, pde_residual, weighted_hessian
from hessosc.newton import analyze, build_polygon, diagonal_class, edge_data
from hessosc.oscquad import nondeg_integral, osc2d
from hessosc.vdc import (
    cubic_instance,
    delta_scaling_instance,
    envelope_member,
    eset_structure,
    estprop_verify,
    fresnel_instance,
    oscillator_member,
    sup_interp_check,
)

RESULTS = {}

X1, X2 = PolyPhase.variables(2)
CUSP = (X2 + X1**2) ** 2
CUBIC = X1**3 + X2**3
DIAG = X1**2 * X2**2
T_GRID = [4.0**-j for j in range(9)]


def _record(n, ok, elapsed, limit, detail):
    ok = bool(ok) and elapsed < limit
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s < {limit}s]"
    RESULTS[n] = line
    print(line)
    return ok


def _fracs(rng, k, lo=-4, hi=4, den=9):
    return [Fraction(rng.randint(lo * den, hi * den), rng.randint(1, den)) for _ in range(k)]


def test_criterion_01_cusp_hessian():
    t0 = time.perf_counter()
    det = CUSP.hessian_det()
    ok = det == 8 * (X2 + X1**2)
    assert _record(1, ok, time.perf_counter() - t0, 1, f"det Hess = {det}")


def test_criterion_02_newton_polygons():
    t0 = time.perf_counter()
    expected = {
        "cusp": (CUSP, [(0, 2), (4, 0)], [(Fraction(1, 2), Fraction(4, 3))], 0),
        "cubic": (CUBIC, [(0, 3), (3, 0)], [(Fraction(1), Fraction(3, 2))], 0),
        "x1^2 x2^2": (DIAG, [(2, 2)], [], 1),
    }
    bad = []
    for name, (P, verts, edges, s) in expected.items():
        poly = build_polygon(P)
        got = [(e.slope_param, e.newton_distance) for e in edge_data(P, poly)]
        if list(poly.vertices) != verts or got != edges or diagonal_class(poly) != s:
            bad.append(name)
    assert _record(2, not bad, time.perf_counter() - t0, 1,
                   f"mismatches: {bad or 'none'} (vertices, beta^2, d, s)")


def test_criterion_03_whitney_folds():
    t0 = time.perf_counter()
    cub = analyze(CUBIC, grid_density=32)
    cusp = analyze(CUSP, grid_density=32)
    cub_verdicts = [f["verdict"] for e in cub["edges"] for f in e["folds"].values()]
    cusp_off = cusp["edges"][0]["folds"]["off-axes"]
    ok = (cub_verdicts and all(v == "fold" for v in cub_verdicts)
          and cusp_off["verdict"] == "violation" and len(cusp_off["witnesses"]) > 0)
    assert _record(3, ok, time.perf_counter() - t0, 10,
                   f"cubic {cub_verdicts}; cusp {cusp_off['verdict']} "
                   f"with {len(cusp_off['witnesses'])} witnesses")


def _perturbed_quadratic(rng):
    h1 = rng.choice([1, -1]) * Fraction(rng.randint(4, 16), 8)
    h2 = rng.choice([1, -1]) * Fraction(rng.randint(4, 16), 8)
    P = h1 * X1**2 / 2 + h2 * X2**2 / 2
    for e in [(3, 0), (2, 1), (1, 2), (0, 3), (4, 0), (2, 2), (0, 4)]:
        P = P + Fraction(rng.randint(-4, 4), 20) * X1 ** e[0] * X2 ** e[1]
    return P


def test_criterion_04_schrodinger_residual():
    t0 = time.perf_counter()
    g = np.linspace(-0.25, 0.25, 5)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    ts = (1e-2, 1e-1, 1.0)
    small = ((-0.25, 0.25), (-0.25, 0.25))
    rng = random.Random(4)
    worst = 0.0
    for _ in range(10):
        op = build_box(_perturbed_quadratic(rng), (0, 0), box=small)
        worst = max(worst, max(np.max(np.abs(pde_residual(op, t, X, relative=True))) for t in ts))
    pure = 0.0
    for P in ((X1**2 + X2**2) / 2, (X1**2 - 3 * X2**2) / 2, X1**2 + X1 * X2 + X2**2):
        op = build_box(P, (0, 0))
        pure = max(pure, max(np.max(np.abs(pde_residual(op, t, X, relative=True))) for t in ts))
    assert _record(4, worst <= 1e-6 and pure <= 1e-12, time.perf_counter() - t0, 30,
                   f"perturbed max rel residual {worst:.2e}, quadratic {pure:.2e}")


def test_criterion_05_expansion_order():
    t0 = time.perf_counter()
    P = (X1**2 + X2**2) / 2
    psi = BumpSpec(2)
    e = expansion(P, psi, N=2, error_integrals=False)
    ts = np.logspace(-3, -1, 7)
    err = [abs(nondeg_integral(P, psi, (0, 0), t, tol=1e-12).value - e.predict(t)) for t in ts]
    slope = float(np.polyfit(np.log(ts), np.log(err), 1)[0])
    target = 1j * math.pi * float(psi(np.zeros(2)))
    c0 = e.coefficients[0]
    ok = slope >= 2.9 and abs(c0 - target) <= 1e-8
    assert _record(5, ok, time.perf_counter() - t0, 60,
                   f"slope {slope:.3f} (>= 2.9); c0 = {c0:.6f}, i pi psi(0) = {target:.6f}, "
                   f"ratio {abs(c0 / target):.6f}")


def test_criterion_06_hessid_identities():
    t0 = time.perf_counter()
    rng = random.Random(6)
    failures = 0
    for _ in range(20):
        terms = {}
        for _ in range(rng.randint(1, 6)):
            e = (rng.randint(0, 5), rng.randint(0, 5))
            if sum(e) <= 5:
                terms[e] = _fracs(rng, 1)[0] or Fraction(1)
        P = PolyPhase(2, terms) if terms else X1**2
        p, q = _fracs(rng, 2), _fracs(rng, 2)
        A1 = weighted_hessian(P, p, 1, q, exact=True)
        A2 = weighted_hessian(P, p, 2, q, exact=True)
        v = [b - a for a, b in zip(p, q)]
        gp = [gi.eval(p) for gi in P.gradient()]
        gq = [gi.eval(q) for gi in P.gradient()]
        first = all(sum(A1[i][j] * v[j] for j in range(2)) == gq[i] - gp[i] for i in range(2))
        form = sum(v[i] * A2[i][j] * v[j] for i in range(2) for j in range(2))
        second = form == 2 * (P.eval(q) - P.eval(p) - sum(a * b for a, b in zip(gp, v)))
        failures += not (first and second)
    assert _record(6, failures == 0, time.perf_counter() - t0, 5,
                   f"{failures} of 20 random phases fail an identity (exact rationals)")


def test_criterion_07_fold_curve():
    t0 = time.perf_counter()
    u = CUBIC.hessian_det()
    curve = trace_curve(CUBIC, (0, 0), u, ((-0.5, 0.5), (-0.5, 0.5)), (0.2, 1.2))
    (br,) = [b for b in curve.branches if b.gamma[0, 0] > 0]
    s = np.array([0.25, 1.0])
    f_err = float(np.max(np.abs(br.evaluate(s)["f"] - s**1.5 / 108) / (s**1.5 / 108)))
    f2, f2n = reduced_f2(br, s), numeric_f2(br, s)
    f2_err = float(np.max(np.abs(f2 - f2n) / np.abs(f2)))
    ok = u == 36 * X1 * X2 and f_err <= 1e-6 and f2_err <= 1e-6
    assert _record(7, ok, time.perf_counter() - t0, 10,
                   f"f rel err {f_err:.1e}; f'' formula vs numeric rel {f2_err:.1e}")


def test_criterion_08_reduced_expansion_error():
    t0 = time.perf_counter()
    u = CUBIC.hessian_det()
    ts = np.logspace(-3, -1, 7)
    diffs = []
    for t in ts:
        red = reduced_expansion0(CUBIC, (0, 0), u, None, 0.25, None, t).value
        full = osc2d(CUBIC, (0, 0), 1 / t, None, 0.25, None, tol=1e-9).value
        diffs.append(abs(full * t**-0.5 - red))
    slope = float(np.polyfit(np.log(ts), np.log(diffs), 1)[0])
    assert _record(8, slope >= 0.9, time.perf_counter() - t0, 120,
                   f"slope {slope:.3f} (>= 0.9); differences {diffs[0]:.2e} .. {diffs[-1]:.2e}")


def test_criterion_09_van_der_corput():
    t0 = time.perf_counter()
    violations, not_ok = 0, 0
    fams = [fresnel_instance()] + [delta_scaling_instance(d) for d in (1e-2, 1.0, 1e2)]
    rng = np.random.default_rng(9)
    cubics = [cubic_instance(a) for a in rng.uniform(-0.1, 0.1, 100)]
    for inst in fams + cubics:
        rep = estprop_verify(inst, T_GRID)
        violations += rep.violations
        not_ok += not rep.hypotheses.ok
    disconnected = 0
    for inst in [fams[0]] + cubics[:20]:
        for eps in (0.02, 0.05, 0.2):
            if inst.C and eps >= inst.delta / inst.C:
                continue
            out = eset_structure(inst, eps)
            disconnected += not (out["connected"] and out["within_strict"])
    ok = violations == 0 and not_ok == 0 and disconnected == 0
    assert _record(9, ok, time.perf_counter() - t0, 60,
                   f"{violations} violations over {len(fams) + len(cubics)} instances; "
                   f"{not_ok} uncertified; {disconnected} E_eps failures")


def test_criterion_10_sup_interpolation():
    t0 = time.perf_counter()
    fam = [envelope_member(A, M) for A in (1.0, 10.0, 100.0) for M in (1.0, 50.0)]
    fam += [oscillator_member(A, B) for A in (1.0, 10.0) for B in (1.0, 10.0)]
    rep = sup_interp_check(fam, n=2, k=2)
    ok = rep["bounded"] and rep["max_constant"] <= 50
    assert _record(10, ok, time.perf_counter() - t0, 10,
                   f"max implied constant {rep['max_constant']:.3f} over {len(fam)} members")


def test_criterion_11_counterexample():
    t0 = time.perf_counter()
    prof = counterexample_profile([2.0**k for k in range(4, 13)])
    last = prof["rows"][-1]
    rel = abs(last["scaled"] - prof["target"]) / prof["target"]
    ok = -0.55 <= prof["exponent"] <= -0.45 and rel <= 0.05
    assert _record(11, ok, time.perf_counter() - t0, 300,
                   f"exponent {prof['exponent']:.4f}; |I| lam^1/2 at 2^12 vs factor product "
                   f"rel {rel:.2e}")


def test_criterion_12_desk_scan_exponents():
    t0 = time.perf_counter()
    lams = [2.0**k for k in range(4, 12)]
    epss = [2.0**-k for k in range(8, 1, -1)]
    cub = fit_decay(scan(CUBIC, lams, epss), s_hint=0)
    diag = fit_decay(scan(DIAG, lams, epss), s_hint=1)
    ok_cub = (-1.1 <= cub.rho_lambda <= -0.9 and -0.6 <= cub.rho_eps <= -0.4
              and cub.compensated_ratio <= 20)
    ok_diag = diag.rms_log < diag.rms and diag.log_slope >= 0
    assert _record(12, ok_cub and ok_diag, time.perf_counter() - t0, 600,
                   f"cubic rho_lam {cub.rho_lambda:.3f}, rho_eps {cub.rho_eps:.3f}, "
                   f"ratio {cub.compensated_ratio:.1f}; x1^2x2^2 rms {diag.rms:.3f} -> "
                   f"{diag.rms_log:.3f}, log slope {diag.log_slope:.4f}")


def test_criterion_13_rescaling():
    t0 = time.perf_counter()
    checks = [
        rescale_check(CUBIC, classify_box(CUBIC, (3, 3)), lam=64.0, eps=2.0**-4),
        rescale_check(CUBIC, classify_box(CUBIC, (1, 6)), xi=(0.05, -0.1), lam=64.0, eps=2.0**-3),
        rescale_check(CUSP, classify_box(CUSP, (3, 6)), xi=(0.1, -0.2), lam=64.0, eps=2.0**-5),
    ]
    worst = max(max(c["integral_rel_diff"], c["hessian_rel_diff"]) for c in checks)
    exact = all(c["hessian_identity_exact"] for c in checks)
    empty = rescale_check(CUBIC, BoxClass((0, 0), "negligible", None, 0, None),
                          psi=BumpSpec(2, radius=0.2))
    zero = empty["direct"] == [0.0, 0.0] and empty["rescaled"] == [0.0, 0.0]
    ks = (8, 16, 24)
    diag = [active_counts(classify_boxes(DIAG, j_max=24), 2.0**-k)["total"] for k in ks]
    cub = [active_counts(classify_boxes(CUBIC, j_max=24), 2.0**-k)["total"] for k in ks]
    # logarithmic growth: counts per unit log2(1/eps) stay bounded; cubic stays O(1)
    log_ok = diag[0] < diag[-1] and max(c / k for c, k in zip(diag, ks)) <= 4
    ok = worst <= 1e-8 and exact and zero and log_ok and max(cub) - min(cub) <= 2
    assert _record(13, ok, time.perf_counter() - t0, 60,
                   f"max rel diff {worst:.1e}; active counts x1^2x2^2 {diag}, cubic {cub}")

