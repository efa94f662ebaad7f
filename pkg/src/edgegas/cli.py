"""Command-line entry point: `edgegas <subcommand> [--config c.json] [--out dir]`."""
from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from .airy import airy_kernel, tracy_widom_pair, tw_tail_asymptotic
from .cdkernel import WeightSpec, cd_kernel, edge_rescaled, gap_probability
from .deviations import log_f_nv, regime, s_of_t
from .equilibrium import DeviationProfile, default_L, fixed_point
from .errors import EdgeGasError, NumericalError, ValidationError
from .fields import ConfiningField, InteractionSpec, alpha_Q
from .harness import (EnsembleConfig, ExperimentReport, base_meta, edge_fluctuation_experiment,
                      run_mcmc, tail_experiment)
from .linearize import (HoeffdingStatistic, SpectralSampler, fourier_U, hoeffding_U,
                        linearization_check, stream)

SUBCOMMANDS = ("equilibrium", "kernel", "gap", "tw", "edge-scan", "deviations",
               "linearize-check", "sample", "tail")


def _grid(cfg: dict, default) -> np.ndarray:
    """experiment.grid is a list of values or {start, stop, num}."""
    g = cfg.get("experiment", {}).get("grid")
    if g is None:
        return np.asarray(default, dtype=float)
    if isinstance(g, dict):
        try:
            return np.linspace(float(g["start"]), float(g["stop"]), int(g.get("num", 21)))
        except KeyError as exc:
            raise ValidationError(f"missing field: experiment.grid.{exc.args[0]}") from None
    return np.asarray(g, dtype=float)


def _load(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    return cfg


def _field_setup(cfg: dict):
    if "Q" not in cfg:
        raise ValidationError("missing field: Q")
    Q = ConfiningField.from_config(cfg["Q"])
    h = InteractionSpec.from_config(cfg.get("h"))
    L = float(cfg["L"]) if "L" in cfg else default_L(Q)
    fp = fixed_point(Q, h, L=L)
    return Q, h, L, fp


def _N(cfg: dict) -> int:
    if "N" not in cfg:
        raise ValidationError("missing field: N")
    N = cfg["N"]
    if not isinstance(N, int) or N < 2:
        raise ValidationError(f"N: need an integer >= 2, got {N!r}")
    return N


def cmd_tw(cfg, args, rep: ExperimentReport, say):
    rows = []
    for s in _grid(cfg, np.linspace(-4.0, 8.0, 25)):
        F, G = tracy_widom_pair(float(s))
        asym = float(tw_tail_asymptotic(s)) if s > 0 else float("nan")
        rows.append([s, F, G, asym])
    rep.add_table("tw", ["s", "F2", "one_minus_F2", "tail_asymptotic"], rows)


def cmd_equilibrium(cfg, args, rep, say):
    Q, h, L, fp = _field_setup(cfg)
    sol = fp.solution
    grid = _grid(cfg, np.linspace(sol.a, sol.b, 101))
    rep.add_table("equilibrium", ["t", "density"], [[t, float(sol.density(t))] for t in grid])
    consts = {"a": sol.a, "b": sol.b, "c_star": sol.c_star, "gamma": sol.gamma,
              "G1": float(sol.G(1.0)), "iterations": fp.iterations, "residual": fp.residual, "L": L}
    if not h.is_zero:
        consts["alpha_Q"] = alpha_Q(Q, L)
    rep.meta.update(consts)
    for k in ("a", "b", "c_star", "gamma", "G1"):
        say(f"{k} = {consts[k]:.15g}")


def _kernel(cfg):
    N = _N(cfg)
    Q, h, L, fp = _field_setup(cfg)
    return N, fp, L, cd_kernel(WeightSpec(N, fp.V, L))


def cmd_kernel(cfg, args, rep, say):
    N, fp, L, K = _kernel(cfg)
    grid = _grid(cfg, np.linspace(-L, L, 121))
    d = K.diag(grid)
    rep.add_table("kernel", ["t", "K_diag", "rho1"], [[t, v, v / N] for t, v in zip(grid, d)])
    rep.meta.update(L=L, b=fp.solution.b)


def cmd_gap(cfg, args, rep, say):
    N, fp, L, K = _kernel(cfg)
    b = fp.solution.b
    grid = _grid(cfg, np.linspace(b - 0.3, b + 0.3, 13))
    rep.add_table("gap", ["t", "gap_probability"], [[t, gap_probability(K, float(t))] for t in grid])
    rep.meta.update(L=L, b=b)


def cmd_edge_scan(cfg, args, rep, say):
    N, fp, L, K = _kernel(cfg)
    sol = fp.solution
    rows = []
    for s in _grid(cfg, np.linspace(-4.0, 4.0, 17)):
        kh = float(edge_rescaled(K, sol, s, s))
        ka = float(airy_kernel(s, s))
        rows.append([s, kh, ka, kh / ka - 1.0])
    rep.add_table("edge_scan", ["s", "K_hat", "K_airy", "rel_error"], rows)
    rep.meta.update(L=L, b=sol.b, gamma=sol.gamma)


def cmd_deviations(cfg, args, rep, say):
    N = _N(cfg)
    Q, h, L, fp = _field_setup(cfg)
    prof = DeviationProfile.from_solution(fp.solution)
    b = prof.b
    rows = []
    for t in _grid(cfg, b + np.linspace(0.05, 0.5, 10)):
        t = float(t)
        s = s_of_t(prof, N, t)
        lf = log_f_nv(prof, N, t)
        tail = tracy_widom_pair(s)[1] if s <= 12.0 else float("nan")
        ratio = math.exp(lf - math.log(tail)) if tail > 0 else float("nan")
        rows.append([t, s, math.exp(lf), tail, ratio, regime(N, t, b)])
    rep.add_table("deviations", ["t", "s", "F_NV", "one_minus_F2", "ratio", "regime"], rows)
    rep.meta.update(L=L, b=b, c_star=prof.c_star)


def cmd_linearize_check(cfg, args, rep, say):
    N = _N(cfg)
    Q, h, L, fp = _field_setup(cfg)
    sol = fp.solution
    sampler = SpectralSampler.build(h, sol)
    stat = HoeffdingStatistic(h, sol)
    seed = int(cfg.get("seed", 0))
    x = np.sort(stream(seed, 2**32).uniform(sol.a, sol.b, N))
    n_mc = int(cfg.get("experiment", {}).get("mc_samples", 100_000))
    r = linearization_check(x, sampler, n_mc=n_mc, seed=seed, strict=False)
    U = hoeffding_U(x, stat)
    Uf = fourier_U(x, stat)
    tol_u = 1e-6 * (1.0 + abs(U))
    rows = [["variance_identity", r.variance, r.two_U, r.tolerance, r.passed],
            ["dual_route_U", U, Uf, tol_u, abs(U - Uf) <= tol_u]]
    if n_mc:
        rows.append(["mc_exp_U", r.mc_mean, r.exp_U, 3.0 * r.mc_se, abs(r.mc_z) <= 3.0])
    rep.add_table("linearize_check", ["quantity", "lhs", "rhs", "tolerance", "pass"], rows)
    rep.add_table("configuration", ["j", "x"], [[j, v] for j, v in enumerate(x)])
    if not all(row[4] for row in rows[:2]):
        raise NumericalError("linearization identity failed; see linearize_check.csv")


def cmd_sample(cfg, args, rep, say):
    if cfg.get("experiment", {}).get("type") == "edge_fluctuation":
        return _edge(cfg, rep, say)
    config = EnsembleConfig.from_dict(cfg)
    res = run_mcmc(config)
    rep.add_table("samples", ["chain", "index", "x_max"],
                  [[c, i, v] for c, ch in enumerate(res.chains) for i, v in enumerate(ch.x_max)])
    rep.meta.update(base_meta(config, L=res.L, tau=list(res.tau), ess=res.ess,
                              acceptance=res.acceptance))


def _edge(cfg, rep, say):
    out = edge_fluctuation_experiment(EnsembleConfig.from_dict(cfg))
    rep.tables.update(out.tables)
    rep.meta.update(out.meta)
    say(f"KS distance to F_2: {out.meta['ks_distance']:.4f} (ESS {out.meta['ess']:.0f})")


def cmd_tail(cfg, args, rep, say):
    config = EnsembleConfig.from_dict(cfg)
    out = tail_experiment(config)
    rep.tables.update(out.tables)
    rep.meta.update(out.meta)


HANDLERS = {"equilibrium": cmd_equilibrium, "kernel": cmd_kernel, "gap": cmd_gap, "tw": cmd_tw,
            "edge-scan": cmd_edge_scan, "deviations": cmd_deviations,
            "linearize-check": cmd_linearize_check, "sample": cmd_sample, "tail": cmd_tail}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgegas", description=__doc__)
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--quiet", action="store_true", help="suppress console output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def say(msg):
        if not args.quiet:
            print(msg)

    t0 = time.perf_counter()
    try:
        cfg = _load(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        rep = ExperimentReport()
        rep.meta = {"command": args.command}
        HANDLERS[args.command](cfg, args, rep, say)
        rep.meta.setdefault("config", cfg)
        rep.meta.setdefault("seed", cfg.get("seed"))
        rep.meta["runtime_seconds"] = time.perf_counter() - t0
        for path in rep.write(args.out):
            say(f"wrote {path}")
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, EdgeGasError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
