"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly:
``python3 tests/test_acceptance.py``.
"""
import filecmp
import json
import math
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from hyperwalk.automaton import Automaton, builtin_automaton, validate
from hyperwalk.boundary import (SphereWeights, exact_harmonic_measure, gibbs_ratio_report,
                                sample_apexes, stationarity_residual)
from hyperwalk.config import ExperimentConfig, _data_file
from hyperwalk.experiments import confinement_experiment, fundamental_report, hitting_experiment
from hyperwalk.green import GreenEvaluator, StepDistribution, mc_first_passage, solve_tree_first_passage
from hyperwalk.group_model import builtin_model, sphere_words
from hyperwalk.pipeline import run_pipeline
from hyperwalk.thermo import (PotentialScheme, beta_curve, beta_direct, build_potential, legendre,
                              pressure, semisimplicity_check, theta_grid)

LOG3 = math.log(3)
F2 = builtin_model("F2")
Z23 = builtin_model("Z2*Z3")
UNIFORM = StepDistribution.uniform(F2)
BIASED = StepDistribution(F2, {"a": Fraction(2, 5), "A": Fraction(1, 10), "b": Fraction(3, 10),
                               "B": Fraction(1, 5)})
Z_UNIFORM = StepDistribution.uniform(Z23)
BOUNDS = json.loads((Path(__file__).parent / "fixtures" / "gibbs_bounds.json").read_text())

RESULTS = {}


def record(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def test_criterion_01_uniform_first_passage():
    t0 = time.perf_counter()
    table = solve_tree_first_passage(F2, UNIFORM)
    f_err = max(abs(v - 1 / 3) for v in table.values.values())
    g_err = abs(table.g11 - 1.5)
    mc = mc_first_passage(F2.element("a"), UNIFORM, 100_000, seed=1)
    se = mc.half_width / 1.96
    elapsed = time.perf_counter() - t0
    ok = f_err < 1e-12 and g_err < 1e-12 and abs(mc.estimate - 1 / 3) <= 3 * se and elapsed < 10
    assert record(1, ok, f"|F-1/3|={f_err:.1e} |G11-3/2|={g_err:.1e} "
                         f"MC F(1,a)={mc.estimate:.5f}+/-{se:.5f} ({elapsed:.1f}s)")


def test_criterion_02_beta_identities():
    t0 = time.perf_counter()
    errs = []
    for mu in (UNIFORM, BIASED):
        s = build_potential(builtin_automaton(F2), GreenEvaluator(mu), 1)
        errs += [abs(pressure(s, 0).beta - LOG3), abs(pressure(s, 1).beta)]
    z = build_potential(builtin_automaton(Z23), GreenEvaluator(Z_UNIFORM), 1)
    z1, z0 = abs(pressure(z, 1).beta), abs(pressure(z, 0).beta - 0.5 * math.log(2))
    elapsed = time.perf_counter() - t0
    ok = max(errs) < 1e-10 and z1 < 1e-8 and z0 < 1e-10 and elapsed < 5
    assert record(2, ok, f"F2 max err={max(errs):.1e} Z2*Z3 |b(1)|={z1:.1e} "
                         f"|b(0)-log2/2|={z0:.1e} ({elapsed:.1f}s)")


def test_criterion_03_affine_case():
    t0 = time.perf_counter()
    scheme = build_potential(builtin_automaton(F2), GreenEvaluator(UNIFORM), 1)
    curve = beta_curve(scheme, theta_grid(-2, 2, 0.05))
    affine = float(np.abs(curve.beta - (1 - curve.thetas) * LOG3).max())
    spectrum = legendre(curve)
    width = spectrum.alpha_max - spectrum.alpha_min
    rep = fundamental_report(UNIFORM, 2000, 200, seed=3)
    l_ok = abs(rep.drift - 0.5) <= 3 * rep.drift_se
    h_ok = abs(rep.entropy - 0.5 * LOG3) <= 3 * rep.entropy_se
    elapsed = time.perf_counter() - t0
    ok = (affine < 1e-9 and width < 1e-6 and rep.verdict == "equality-consistent"
          and abs(rep.gap) <= 3 * rep.combined_se and l_ok and h_ok and elapsed < 120)
    assert record(3, ok, f"affine err={affine:.1e} alpha width={width:.1e} verdict={rep.verdict} "
                         f"l={rep.drift:.4f} h={rep.entropy:.4f} gap={rep.gap:.4f}"
                         f"+/-{rep.combined_se:.4f} ({elapsed:.1f}s)")


def test_criterion_04_strict_case():
    t0 = time.perf_counter()
    scheme = build_potential(builtin_automaton(F2), GreenEvaluator(BIASED), 1)
    unit = beta_curve(scheme, theta_grid(0, 1, 0.05))
    curv = float(unit.second_differences.max())
    spectrum = legendre(beta_curve(scheme, theta_grid(-2, 2, 0.05)))
    _, f0 = spectrum.at_theta(0)
    a1, f1 = spectrum.at_theta(1)
    concave = bool(np.all(np.diff(spectrum.f[spectrum.thetas >= 0]) <= 1e-12)
                   and np.all(np.diff(spectrum.f[spectrum.thetas <= 0]) >= -1e-12))
    rep = fundamental_report(BIASED, 2000, 200, seed=4)
    rel = abs(a1 - rep.dimension_ratio) / rep.dimension_ratio
    elapsed = time.perf_counter() - t0
    ok = (curv > 1e-3 and abs(f0 - LOG3) < 1e-6 and abs(spectrum.f.max() - f0) < 1e-6 and concave
          and abs(f1 - a1) < 1e-6 and rel < 0.03 and elapsed < 300)
    assert record(4, ok, f"max 2nd diff={curv:.2e} f(a(0))={f0:.8f} |f(a1)-a1|={abs(f1 - a1):.1e} "
                         f"a(1)={a1:.4f} h/l={rep.dimension_ratio:.4f} rel={rel:.2%} ({elapsed:.1f}s)")


def test_criterion_05_direct_pressure():
    t0 = time.perf_counter()
    worst_gap, worst_spread, notes = 0.0, 0.0, []
    cases = [("F2 uniform", F2, UNIFORM, True), ("F2 biased", F2, BIASED, True),
             ("Z2*Z3", Z23, Z_UNIFORM, False)]
    for name, model, mu, cayley_tree in cases:
        green = GreenEvaluator(mu)
        scheme = build_potential(builtin_automaton(model), green, 1)
        spheres = {n: sphere_words(model, n) for n in range(4, 13)}
        for th in (0.0, 0.5, 1.0, 2.0):
            beta = pressure(scheme, th).beta
            logs = [math.log(beta_direct(green, th, n, beta=beta, words=spheres[n]).normalized_ratio)
                    for n in range(4, 13)]
            worst_spread = max(worst_spread, max(logs) - min(logs))
            gap = abs(beta_direct(green, th, 12, words=spheres[12]).value - beta)
            if cayley_tree:
                worst_gap = max(worst_gap, gap)
            else:
                notes.append(gap)
    elapsed = time.perf_counter() - t0
    ok = worst_gap < 0.03 and worst_spread < 1.0 and elapsed < 120
    assert record(5, ok, f"max |direct-operator| (F2)={worst_gap:.4f} log-spread={worst_spread:.3f} "
                         f"Z2*Z3 gap={max(notes):.4f} (finite-n log2/12) ({elapsed:.1f}s)")


def test_criterion_06_gibbs():
    t0 = time.perf_counter()
    parts, ok = [], True
    for key, mu in (("uniform_f2", UNIFORM), ("biased_m2", BIASED)):
        green = GreenEvaluator(mu)
        bound = BOUNDS[key]["bound"]
        scheme = build_potential(builtin_automaton(F2), green, 1)
        apexes = sample_apexes(F2, 200, 8, seed=6)
        nu = exact_harmonic_measure(green.table, 8)
        reps = [gibbs_ratio_report(1.0, apexes, lambda s: nu(s.apex), green, 0.0, bound=bound)]
        for th in (0.0, 1.0):
            sw = SphereWeights(green, th, 12)
            reps.append(gibbs_ratio_report(th, apexes, sw.shadow_mass, green,
                                           pressure(scheme, th).beta, bound=bound))
        ok &= all(r.passed for r in reps)
        parts.append(f"{key}: " + "/".join(f"{r.spread:.3f}" for r in reps) + f" < {bound}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    assert record(6, ok, "spreads nu/mu0/mu1 " + "; ".join(parts) + f" ({elapsed:.1f}s)")


def test_criterion_07_stationarity():
    exact = max(stationarity_residual(exact_harmonic_measure(solve_tree_first_passage(F2, mu), 6),
                                      mu).residual for mu in (UNIFORM, BIASED))
    counting = SphereWeights(GreenEvaluator(BIASED), 0.0, 8).measure(6)
    control = stationarity_residual(counting, BIASED).residual
    ok = exact < 1e-10 and control > 1e-2
    assert record(7, ok, f"exact residual={exact:.1e} counting-measure control={control:.3f}")


def test_criterion_08_hitting():
    t0 = time.perf_counter()
    (rec,) = hitting_experiment(UNIFORM, [10], [0.25, 0.5, 0.75], 100_000, seed=8, h_hat=LOG3)
    devs = {a: rec.exponents[a] - LOG3 for a in (0.25, 0.5, 0.75)}
    elapsed = time.perf_counter() - t0
    ok = all(abs(d) < 0.1 for d in devs.values()) and elapsed < 180
    assert record(8, ok, "(1/10)log K(a) - log3: " +
                  " ".join(f"a={a}:{d:+.3f}" for a, d in devs.items()) +
                  f" distinct points={len(rec.points)} ({elapsed:.1f}s)")


def test_criterion_09_confinement():
    t0 = time.perf_counter()
    rep = fundamental_report(BIASED, 2000, 200, seed=9)
    h_hat = rep.dimension_ratio
    strict = confinement_experiment(BIASED, 0.2, 14, walks=5000, seed=9, h_hat=h_hat)
    control = confinement_experiment(UNIFORM, 0.2, 14, walks=5000, seed=9, h_hat=LOG3)
    rel = abs(strict.exponent - h_hat) / h_hat
    elapsed = time.perf_counter() - t0
    ok = (rel < 0.10 and strict.exponent < strict.v - 0.05
          and abs(control.exponent - control.v) < 0.05 and elapsed < 600)
    assert record(9, ok, f"biased exponent={strict.exponent:.4f} h_hat={h_hat:.4f} rel={rel:.1%} "
                         f"v-0.05={strict.v - 0.05:.4f}; uniform exponent={control.exponent:.4f} "
                         f"v={control.v:.4f} ({elapsed:.1f}s)")


def test_criterion_10_automata():
    ok = True
    for model in (F2, Z23):
        ok &= validate(builtin_automaton(model), model, 10).passed
    schemes = [build_potential(builtin_automaton(m), GreenEvaluator(mu), 1)
               for m, mu in ((F2, UNIFORM), (F2, BIASED), (Z23, Z_UNIFORM))]
    semi = all(semisimplicity_check(s, th).passed for s in schemes for th in (-1, 0, 0.5, 1, 2))
    aut = builtin_automaton(F2)
    broken = Automaton(aut.states, aut.initial, tuple(e for e in aut.edges if e != ("b", "a", "a")))
    missing_caught = not validate(broken, F2, 10).passed
    chained = PotentialScheme.from_weights(
        ["i", "p", "q"], [("i", "p", 1.0), ("p", "p", 0.5), ("p", "q", 1.0), ("q", "q", 0.5)])
    chain_caught = not semisimplicity_check(chained, 1.0).passed
    ok = ok and semi and missing_caught and chain_caught
    assert record(10, ok, f"bijection+geodesic depth 10 ok; semisimple={semi} "
                          f"missing-edge caught={missing_caught} chained-SCC caught={chain_caught}")


def test_criterion_11_determinism():
    cfg = ExperimentConfig.load(_data_file("uniform_f2.json"))
    with tempfile.TemporaryDirectory() as tmp:
        a = run_pipeline(cfg, Path(tmp) / "a")
        b = run_pipeline(cfg, Path(tmp) / "b")
        csvs = sorted(f for f in a.files if f.endswith(".csv"))
        _, mismatch, errors = filecmp.cmpfiles(a.out, b.out, csvs, shallow=False)
    ok = a.ok and b.ok and bool(csvs) and not mismatch and not errors
    assert record(11, ok, f"{len(csvs)} CSV files ({', '.join(csvs)}) byte-identical={not mismatch}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
