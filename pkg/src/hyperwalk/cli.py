"""Command-line entry point: ``hyperwalk <group> <command> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import HyperwalkError, ModelError


def _load_config(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return cfg.override(model=args.model, steps=args.mu, seed=args.seed,
                        automaton=getattr(args, "automaton", None))


def _emit(args, record, lines):
    if args.json:
        print(json.dumps(record, indent=2, sort_keys=True, default=float))
    else:
        for line in lines:
            print(line)


def _grid(text):
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like lo:hi:step") from None
    return {"lo": lo, "hi": hi, "step": step}


# ---------------------------------------------------------------- commands
def cmd_automaton_validate(args):
    from .automaton import growth_rate, scc_decompose, validate
    cfg = _load_config(args)
    model = cfg.resolve_model()
    aut = cfg.resolve_automaton(model)
    depth = args.depth or cfg.budgets["validate_depth"]
    rep = validate(aut, model, depth, budget=cfg.budgets["max_elements"])
    dec = scc_decompose(aut)
    lines = list(rep.lines())
    for c in dec.nontrivial:
        lines.append(f"  component {c.index}: states={' '.join(c.states)} period={c.period}")
    lines.append(f"  growth v = {growth_rate(aut, dec):.12f}")
    _emit(args, {"passed": rep.passed, "path_counts": rep.path_counts,
                 "sphere_sizes": rep.sphere_sizes, "missing": rep.missing[:5]}, lines)
    return 0 if rep.passed else 1


def cmd_walk_stats(args):
    from .automaton import growth_rate
    from .walk_stats import ray_tracking, sample_endpoints, simulate
    cfg = _load_config(args)
    model = cfg.resolve_model()
    mu = cfg.resolve_steps(model)
    b = cfg.budgets
    steps = args.steps or b["walk_steps"]
    s = sample_endpoints(mu, steps, args.replicas or b["replicas"], cfg.seed)
    l_est, h_est = s.drift(), s.green_speed()
    v = growth_rate(cfg.resolve_automaton(model))
    combined = (h_est.se ** 2 + (v * l_est.se) ** 2) ** 0.5
    gap = h_est.mean - l_est.mean * v
    verdict = "equality-consistent" if abs(gap) <= 3 * combined else "strict"
    defect = ray_tracking(simulate(mu, steps, cfg.seed)).defect
    rec = {"drift": l_est.mean, "drift_se": l_est.se, "entropy": h_est.mean,
           "entropy_se": h_est.se, "v": v, "gap": gap, "combined_se": combined,
           "verdict": verdict, "tracking_defect": defect}
    lines = [f"{'quantity':<22}{'estimate':>12}{'std err':>12}",
             f"{'drift l':<22}{l_est.mean:>12.6f}{l_est.se:>12.6f}",
             f"{'entropy h':<22}{h_est.mean:>12.6f}{h_est.se:>12.6f}",
             f"{'growth v':<22}{v:>12.6f}",
             f"{'h - l v':<22}{gap:>12.6f}{combined:>12.6f}",
             f"{'tracking defect':<22}{defect:>12.6f}   (empirical threshold 0.05)",
             f"verdict: {verdict}"]
    _emit(args, rec, lines)
    return 0


def _thermo(args):
    from .thermo import beta_curve, default_scheme, legendre, pressure, semisimplicity_check, theta_grid
    cfg = _load_config(args)
    model = cfg.resolve_model()
    mu = cfg.resolve_steps(model)
    scheme, green, aut = default_scheme(model, mu, cfg.resolve_automaton(model))
    g = args.grid or cfg.theta_grid
    curve = beta_curve(scheme, theta_grid(g["lo"], g["hi"], g["step"]))
    spectrum = legendre(curve)
    summary = {
        "v": pressure(scheme, 0.0).beta,
        "beta1_residual": abs(pressure(scheme, 1.0).beta),
        "semisimple": {str(t): semisimplicity_check(scheme, t).passed for t in (-1, 0, 0.5, 1, 2)},
        "alpha_min": spectrum.alpha_min, "alpha_max": spectrum.alpha_max, "alpha_extrapolated": True,
        "convex": curve.convex,
    }
    return curve, spectrum, summary


def cmd_thermo(args):
    from .pipeline import fmt
    curve, spectrum, summary = _thermo(args)
    if args.command == "beta":
        header = ["theta", "beta", "dbeta"]
        rows = zip(curve.thetas, curve.beta, curve.derivative)
    else:
        header = ["theta", "beta", "dbeta", "alpha", "f"]
        rows = zip(curve.thetas, curve.beta, curve.derivative, spectrum.alpha, spectrum.f)
    text = ",".join(header) + "\n" + "".join(",".join(fmt(v) for v in r) + "\n" for r in rows)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.csv").write_text(text)
        (out / f"{args.command}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    print(json.dumps(summary, sort_keys=True), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_boundary(args):
    from .boundary import (SphereWeights, exact_harmonic_measure, gibbs_ratio_report,
                           local_dimension_samples, sample_apexes, stationarity_residual,
                           walk_end_words)
    from .green import GreenEvaluator
    from .thermo import default_scheme, pressure
    cfg = _load_config(args)
    model = cfg.resolve_model()
    mu = cfg.resolve_steps(model)
    green = GreenEvaluator(mu)
    if not green.exact:
        raise ModelError("boundary commands need a tree-like model with nearest-neighbour steps")
    gib = cfg.gibbs
    if args.command == "gibbs":
        scheme, _, _ = default_scheme(model, mu, green=green)
        nu = exact_harmonic_measure(green.table, gib["max_length"])
        apexes = sample_apexes(model, gib["apexes"], gib["max_length"], seed=cfg.seed)
        reps = [("harmonic", gibbs_ratio_report(1.0, apexes, lambda s: nu(s.apex), green, 0.0,
                                                R=cfg.shadow_radius, bound=gib["bound"]))]
        n = max(cfg.budgets["sphere_depth"], gib["max_length"])
        for th in (0.0, 1.0):
            sw = SphereWeights(green, th, n)
            reps.append((f"mu_theta({th:g})", gibbs_ratio_report(
                th, apexes, sw.shadow_mass, green, pressure(scheme, th).beta,
                R=cfg.shadow_radius, bound=gib["bound"])))
        rec = {k: {"spread": r.spread, "passed": r.passed} for k, r in reps}
        lines = [f"{k:<16}{r}" for k, r in reps]
        if args.out:
            from .pipeline import write_csv
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_csv(Path(args.out) / "gibbs.csv", ["apex"] + [k for k, _ in reps],
                      [[g.word] + [r.log_ratios[i] for _, r in reps] for i, g in enumerate(apexes)])
        _emit(args, rec, lines)
        return 0 if all(r.passed for _, r in reps) else 1
    if args.command == "stationarity":
        depth = gib["max_length"]
        nu = exact_harmonic_measure(green.table, depth)
        res = stationarity_residual(nu, mu)
        counting = SphereWeights(green, 0.0, depth + 2).measure(depth)
        ctrl = stationarity_residual(counting, mu)
        rec = {"harmonic": res.residual, "counting_control": ctrl.residual}
        _emit(args, rec, [f"harmonic measure residual   {res.residual:.3e} (worst cone {res.worst_cone})",
                          f"counting measure residual   {ctrl.residual:.3e} (control)"])
        return 0
    b = cfg.budgets
    words = [w for w in walk_end_words(mu, b["localdim_steps"], b["localdim_walks"], cfg.seed) if w]
    ld = local_dimension_samples(words, green)
    rec = {"n": ld.n_eval, "mean": ld.mean_at_n, "se": ld.se_at_n}
    _emit(args, rec, [f"-(1/n) log F(1, gamma(n)) at n={ld.n_eval}: {ld.mean_at_n:.6f} +/- {ld.se_at_n:.6f}"])
    return 0


def cmd_experiment(args):
    from .experiments import confinement_experiment, hitting_experiment
    from .walk_stats import sample_endpoints
    cfg = _load_config(args)
    model = cfg.resolve_model()
    mu = cfg.resolve_steps(model)
    b = cfg.budgets
    s = sample_endpoints(mu, b["walk_steps"], b["replicas"], cfg.seed)
    h_hat = s.green_speed().mean / s.drift().mean
    if args.command == "hitting":
        recs = hitting_experiment(mu, cfg.hitting["n"], cfg.hitting["a"], b["hitting_walks"],
                                  cfg.seed, h_hat)
        lines = [f"h_hat = {h_hat:.6f}"]
        out = []
        for r in recs:
            for a in cfg.hitting["a"]:
                lines.append(f"n={r.n:<3d} a={a:<5g} K={r.K[a]:<8d} (1/n)log K={r.exponents[a]:.6f} "
                             f"excluded={r.excluded}")
                out.append({"n": r.n, "a": a, "K": r.K[a], "exponent": r.exponents[a]})
        _emit(args, {"h_hat": h_hat, "records": out}, lines)
        return 0
    conf = cfg.confinement
    rep = confinement_experiment(mu, conf["a"], conf["n_max"], walks=b["confine_walks"],
                                 seed=cfg.seed, h_hat=h_hat, slack=args.slack)
    _emit(args, {"slack": rep.slack, "coverage": rep.coverage, "exponent": rep.exponent,
                 "h_hat": rep.h_hat, "v": rep.v}, rep.lines())
    return 0


def cmd_report(args):
    from .experiments import fundamental_report
    cfg = _load_config(args)
    model = cfg.resolve_model()
    mu = cfg.resolve_steps(model)
    b = cfg.budgets
    rep = fundamental_report(mu, b["walk_steps"], b["replicas"], cfg.seed,
                             aut=cfg.resolve_automaton(model))
    _emit(args, rep.to_dict(), rep.lines())
    return 0


def cmd_pipeline(args):
    from .pipeline import run_pipeline
    cfg = _load_config(args)
    bundle = run_pipeline(cfg, out=args.out)
    for k, v in bundle.status.items():
        print(f"{k:<12} {v}")
    print(f"outputs in {bundle.out}")
    return 0 if bundle.ok else 1


# ------------------------------------------------------------------ parser
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--model", help="builtin model name or model file (overrides config)")
    common.add_argument("--mu", help="'uniform' or a step file (overrides config)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(prog="hyperwalk", description=__doc__)
    groups = p.add_subparsers(dest="group", required=True)

    g = groups.add_parser("automaton").add_subparsers(dest="command", required=True)
    c = g.add_parser("validate", parents=[common])
    c.add_argument("--depth", type=int)
    c.add_argument("--automaton", help="automaton file (default: builtin)")
    c.set_defaults(func=cmd_automaton_validate)

    g = groups.add_parser("walk").add_subparsers(dest="command", required=True)
    c = g.add_parser("stats", parents=[common])
    c.add_argument("--steps", type=int)
    c.add_argument("--replicas", type=int)
    c.set_defaults(func=cmd_walk_stats)

    g = groups.add_parser("thermo").add_subparsers(dest="command", required=True)
    for name in ("beta", "spectrum"):
        c = g.add_parser(name, parents=[common])
        c.add_argument("--grid", type=_grid, help="lo:hi:step")
        c.set_defaults(func=cmd_thermo)

    g = groups.add_parser("boundary").add_subparsers(dest="command", required=True)
    for name in ("gibbs", "localdim", "stationarity"):
        g.add_parser(name, parents=[common]).set_defaults(func=cmd_boundary)

    g = groups.add_parser("experiment").add_subparsers(dest="command", required=True)
    g.add_parser("hitting", parents=[common]).set_defaults(func=cmd_experiment)
    c = g.add_parser("confine", parents=[common])
    c.add_argument("--slack", type=float, help="fixed slack c instead of calibration")
    c.set_defaults(func=cmd_experiment)

    g = groups.add_parser("report").add_subparsers(dest="command", required=True)
    g.add_parser("fundamental", parents=[common]).set_defaults(func=cmd_report)

    g = groups.add_parser("pipeline").add_subparsers(dest="command", required=True)
    g.add_parser("run", parents=[common]).set_defaults(func=cmd_pipeline)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HyperwalkError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
