"""Run every stage for one config and write CSV/JSON outputs plus a manifest."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .automaton import growth_rate, scc_decompose, validate
from .boundary import (SphereWeights, exact_harmonic_measure, gibbs_ratio_report,
                       local_dimension_samples, sample_apexes, stationarity_residual,
                       walk_end_words)
from .errors import HyperwalkError
from .experiments import confinement_experiment, fundamental_report, hitting_experiment
from .green import GreenCache, GreenEvaluator
from .group_model import sphere_words
from .thermo import beta_curve, build_potential, legendre, pressure, semisimplicity_check, theta_grid
from .walk_stats import ray_tracking, sample_endpoints, simulate

STAGES = ("validate", "green", "walk_stats", "thermo", "boundary", "experiments")


def fmt(x):
    """Fixed repr for floats so reruns are byte-identical."""
    if isinstance(x, (float, np.floating)):
        return repr(round(float(x), 12))
    return str(x)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    Path(path).write_text(buf.getvalue())


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return round(v, 12) if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data):
    Path(path).write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


@dataclass
class Context:
    cfg: object
    out: Path
    model: object = None
    mu: object = None
    aut: object = None
    green: object = None
    scheme: object = None
    curve: object = None
    results: dict = field(default_factory=dict)


def stage_validate(ctx):
    cfg = ctx.cfg
    ctx.model = cfg.resolve_model()
    ctx.mu = cfg.resolve_steps(ctx.model)
    ctx.aut = cfg.resolve_automaton(ctx.model)
    rep = validate(ctx.aut, ctx.model, cfg.budgets["validate_depth"],
                   budget=cfg.budgets["max_elements"])
    (ctx.out / "validation.txt").write_text(str(rep) + "\n")
    dec = scc_decompose(ctx.aut)
    ctx.results["validate"] = {
        "passed": rep.passed,
        "growth_rate": growth_rate(ctx.aut, dec),
        "components": [{"states": list(c.states), "period": c.period} for c in dec.nontrivial],
    }
    write_json(ctx.out / "automaton.json", ctx.results["validate"])
    return rep.passed


def stage_green(ctx):
    ctx.green = GreenEvaluator(ctx.mu, horizon=ctx.cfg.budgets["horizon"],
                               budget=ctx.cfg.budgets["max_elements"])
    info = {"exact": ctx.green.exact, "G11": ctx.green.g11}
    if ctx.green.table is not None:
        info["first_passage"] = dict(ctx.green.table.values)
        info["residual"] = ctx.green.table.residual
    cache = GreenCache()
    for n in range(0, 5):
        for w in sphere_words(ctx.model, n):
            cache[w] = ctx.green(w)
    cache.save(ctx.out / "green_cache.bin")
    write_json(ctx.out / "green.json", info)
    return True


def stage_walk_stats(ctx):
    b = ctx.cfg.budgets
    s = sample_endpoints(ctx.mu, b["walk_steps"], b["replicas"], ctx.cfg.seed,
                         green_speed=ctx.green.exact)
    info = {"drift": s.drift().mean, "drift_se": s.drift().se}
    if ctx.green.exact:
        h = s.green_speed()
        info.update(entropy=h.mean, entropy_se=h.se)
    traj = simulate(ctx.mu, b["walk_steps"], ctx.cfg.seed)
    if traj.final.word:
        info["tracking_defect"] = ray_tracking(traj).defect
        info["tracking_threshold"] = "empirical 0.05"
    ctx.results["walk_stats"] = info
    write_json(ctx.out / "walk_stats.json", info)
    return True


def stage_thermo(ctx):
    cfg = ctx.cfg
    k = 1 if ctx.green.exact else 4
    ctx.scheme = build_potential(ctx.aut, ctx.green, k)
    g = cfg.theta_grid
    ctx.curve = beta_curve(ctx.scheme, theta_grid(g["lo"], g["hi"], g["step"]))
    spectrum = legendre(ctx.curve)
    write_csv(ctx.out / "beta.csv", ["theta", "beta", "dbeta", "alpha", "f"],
              zip(ctx.curve.thetas, ctx.curve.beta, ctx.curve.derivative, spectrum.alpha, spectrum.f))
    semi = {str(t): semisimplicity_check(ctx.scheme, t).passed for t in (-1, 0, 0.5, 1, 2)}
    info = {
        "v": pressure(ctx.scheme, 0.0).beta,
        "beta1_residual": abs(pressure(ctx.scheme, 1.0).beta),
        "convex": ctx.curve.convex,
        "alpha_min": spectrum.alpha_min, "alpha_max": spectrum.alpha_max, "alpha_extrapolated": True,
        "semisimple": semi,
        "candidate_kinks": ctx.curve.candidate_kinks,
    }
    ctx.results["thermo"] = info
    write_json(ctx.out / "thermo.json", info)
    return ctx.curve.convex and all(semi.values())


def stage_boundary(ctx):
    cfg = ctx.cfg
    gib = cfg.gibbs
    if not (ctx.model.is_tree_like and ctx.green.exact):
        ctx.results["boundary"] = {"skipped": "exact cone algebra needs a tree-like model"}
        write_json(ctx.out / "boundary.json", ctx.results["boundary"])
        return True
    depth = gib["max_length"]
    nu = exact_harmonic_measure(ctx.green.table, depth)
    apexes = sample_apexes(ctx.model, gib["apexes"], depth, seed=cfg.seed)
    R = cfg.shadow_radius
    reports = {"harmonic": gibbs_ratio_report(1.0, apexes, lambda s: nu(s.apex), ctx.green, 0.0,
                                              R=R, bound=gib["bound"])}
    n = max(cfg.budgets["sphere_depth"], depth)
    for th in (0.0, 1.0):
        sw = SphereWeights(ctx.green, th, n, budget=cfg.budgets["max_elements"])
        reports[f"mutheta_{th:g}"] = gibbs_ratio_report(
            th, apexes, sw.shadow_mass, ctx.green, pressure(ctx.scheme, th).beta, R=R,
            bound=gib["bound"])
    rows = []
    for i, g in enumerate(apexes):
        rows.append([g.word, len(g.word)] + [reports[k].log_ratios[i] for k in sorted(reports)])
    write_csv(ctx.out / "gibbs.csv", ["apex", "length"] + sorted(reports), rows)
    stat = stationarity_residual(nu, ctx.mu, depth=min(4, depth - ctx.mu.reach))
    b = cfg.budgets
    words = walk_end_words(ctx.mu, b["localdim_steps"], b["localdim_walks"], cfg.seed)
    words = [w for w in words if w]
    ld = local_dimension_samples(words, ctx.green)
    info = {k: {"spread": r.spread, "min": r.min, "max": r.max, "passed": r.passed}
            for k, r in reports.items()}
    info["stationarity_residual"] = stat.residual
    info["local_dimension"] = {"n": ld.n_eval, "mean": ld.mean_at_n, "se": ld.se_at_n}
    ctx.results["boundary"] = info
    write_json(ctx.out / "boundary.json", info)
    return True


def stage_experiments(ctx):
    cfg = ctx.cfg
    b = cfg.budgets
    rep = fundamental_report(ctx.mu, b["walk_steps"], b["replicas"], cfg.seed, aut=ctx.aut)
    (ctx.out / "fundamental.txt").write_text("\n".join(rep.lines()) + "\n")
    write_json(ctx.out / "fundamental.json", rep.to_dict())
    ctx.results["fundamental"] = {"verdict": rep.verdict}
    h_hat = rep.dimension_ratio
    hit = cfg.hitting
    records = hitting_experiment(ctx.mu, hit["n"], hit["a"], b["hitting_walks"], cfg.seed, h_hat)
    write_csv(ctx.out / "hitting.csv", ["n", "a", "K", "exponent", "h_hat", "walks", "excluded"],
              [[r.n, a, r.K[a], r.exponents[a], r.h_hat, r.walks, r.excluded]
               for r in records for a in hit["a"]])
    if ctx.model.cayley_is_tree:
        conf = cfg.confinement
        c = confinement_experiment(ctx.mu, conf["a"], conf["n_max"], walks=b["confine_walks"],
                                   seed=cfg.seed, h_hat=h_hat)
        write_csv(ctx.out / "confinement.csv", ["n", "count", "sphere", "exponent"],
                  [[n, c.counts[n], c.sphere_sizes[n], c.exponents[n]] for n in sorted(c.counts)])
        ctx.results["confinement"] = {"slack": c.slack, "coverage": c.coverage,
                                      "exponent": c.exponent, "h_hat": h_hat, "v": c.v}
        write_json(ctx.out / "confinement.json", ctx.results["confinement"])
    return True


STAGE_FUNCS = {
    "validate": stage_validate, "green": stage_green, "walk_stats": stage_walk_stats,
    "thermo": stage_thermo, "boundary": stage_boundary, "experiments": stage_experiments,
}


@dataclass
class Bundle:
    out: Path
    status: dict
    files: list

    @property
    def ok(self):
        return all(s == "ok" for s in self.status.values())


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_pipeline(cfg, out=None, stages=STAGES):
    """Execute the stages in order; a failing stage stops the run but keeps earlier outputs."""
    out = Path(out) if out is not None else cfg.output_path()
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps())
    ctx = Context(cfg, out)
    status = {}
    for name in stages:
        try:
            ok = STAGE_FUNCS[name](ctx)
            status[name] = "ok" if ok else "check-failed"
        except (HyperwalkError, ValueError, FileNotFoundError) as exc:
            status[name] = f"error: {exc}"
            (out / f"{name}.error.txt").write_text(traceback.format_exc())
            break
    files = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.txt")
    lines = [
        f"config_sha256 {cfg.digest()}",
        f"seed {cfg.seed}",
        f"hyperwalk {__version__}",
        f"python {platform.python_version()}",
        f"numpy {np.__version__}",
        f"scipy {scipy.__version__}",
    ]
    lines += [f"stage {k} {v}" for k, v in status.items()]
    lines += [f"file {name} {_sha(out / name)}" for name in files]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    return Bundle(out, status, files)
