"""Command-line front end.

Every subcommand writes one JSON document with ``meta`` (version, argv, seed,
wall time), ``inputs`` (sha256 of each input file) and ``results``. Floats are
written with 17 significant digits so reruns can be compared byte for byte.

Exit codes: 0 success, 2 user error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 2, 3


class UserError(Exception):
    """Bad input: missing file, malformed config, invalid option value."""


# ---------------------------------------------------------------------------
# JSON emission

def _encode(obj) -> str:
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def dumps(doc) -> str:
    return _encode(doc) + "\n"


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# input helpers

def _existing(path: str | None, what: str) -> Path:
    if path is None:
        raise UserError(f"{what} file is required")
    p = Path(path)
    if not p.is_file():
        raise UserError(f"{what} file not found: {path}")
    return p


def read_recipe(path) -> list[str]:
    """Terms one per line or comma separated; ``#`` starts a comment."""
    terms = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            for piece in (t.strip() for t in line.split(",")):
                # a bare column name is the second argument of the previous term, as in cross:a,b
                if piece and terms and ":" not in piece and piece != "const" and ":" in terms[-1]:
                    terms[-1] += "," + piece
                elif piece:
                    terms.append(piece)
    if not terms:
        raise UserError(f"{path}: recipe lists no terms")
    return terms


_SPLIT = re.compile(r"[,\s]+")


def read_labelled_edges(path, ids) -> np.ndarray:
    """Directed 0/1 matrix over ``ids`` from ``u v`` lines."""
    pos = {s: k for k, s in enumerate(ids)}
    n = len(ids)
    d = np.zeros((n, n))
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p for p in _SPLIT.split(text) if p]
            if len(parts) != 2 or parts[0] not in pos or parts[1] not in pos:
                raise UserError(f"{path}: line {lineno}: expected two known node ids")
            if parts[0] == parts[1]:
                raise UserError(f"{path}: line {lineno}: self-link")
            d[pos[parts[0]], pos[parts[1]]] = 1.0
    return d


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UserError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise UserError(f"{path}: config must be a JSON object")
    return cfg


def _moment_cov_mode(text: str):
    if text in ("exact", "projection"):
        return text, None
    m = re.fullmatch(r"subsample:(\d+)", text)
    if m:
        return "subsample", int(m.group(1))
    raise UserError(f"--cov must be exact, projection or subsample:M, got {text!r}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args, inputs):
    from .graph import Graph, density, save_edgelist
    from .graphon import GraphonSpec, load_grid, sample_adjacency

    if args.model == "er":
        spec = GraphonSpec.constant(args.rho)
    elif args.model == "beta":
        spec = GraphonSpec.beta(args.mu, args.sigma)
    elif args.model == "threshold":
        spec = GraphonSpec.threshold(args.alpha)
    else:
        grid = _existing(args.grid, "graphon grid")
        inputs[str(grid)] = sha256(grid)
        spec = load_grid(grid)
    adj, _ = sample_adjacency(spec, args.n, args.seed)
    g = Graph.from_adjacency(adj)
    text = save_edgelist(g, args.out)
    return {"model": args.model, "n": args.n, "edges": g.n_edges, "density": density(g),
            "out": args.out, "edges_sha256": hashlib.sha256(text.encode()).hexdigest()}


def _graph_input(args, inputs):
    from .graph import load_edgelist

    path = _existing(args.edges, "edge list")
    inputs[str(path)] = sha256(path)
    return load_edgelist(path, n_hint=args.n)


def cmd_moments(args, inputs):
    from .graph import density
    from .moments import count_patterns, moment_covariance, transitivity_from_densities, transitivity_se

    g = _graph_input(args, inputs)
    patterns = [p.strip() for p in args.patterns.split(",") if p.strip()]
    est = count_patterns(g, patterns)
    out = {"n": g.n, "density": density(g), "patterns": {}}
    for name, e in est.items():
        out["patterns"][name] = {"induced_count": e.induced_count, "injective_count": e.injective_count,
                                 "induced_density": e.induced_density, "injective_density": e.injective_density,
                                 "induced_share": e.induced_share, "iso_count": e.iso_count}
    order3 = [p for p in est if est[p].p == 3]
    if args.cov != "none" and order3:
        mode, m = _moment_cov_mode(args.cov)
        cov = moment_covariance(g, order3, mode=mode, seed=args.seed,
                                **({"M": m} if m is not None else {}))
        out["covariance"] = {"names": list(cov.names), "mode": cov.mode, "matrix": cov.matrix,
                             "se": cov.se, "negative_variance": cov.negative_variance,
                             "components": {str(q): c for q, c in cov.components.items()}}
        if {"triangle", "twostar"} <= set(cov.names):
            p_t = est["triangle"].induced_density
            p_s = est["twostar"].induced_density
            out["transitivity"] = {"ti": transitivity_from_densities(p_t, p_s), "se": transitivity_se(cov)}
    return out


def cmd_transitivity(args, inputs):
    from .graph import density
    from .moments import transitivity_report

    g = _graph_input(args, inputs)
    mode, m = _moment_cov_mode(args.cov)
    rep = transitivity_report(g, mode=mode, seed=args.seed, **({"M": m} if m is not None else {}))
    return {"n": g.n, "density": density(g), **{k: v for k, v in vars(rep).items()}}


def _dyadic_inputs(args, inputs, directed=True):
    from .dyadic import read_dyad_csv, read_node_csv

    nodes = _existing(args.nodes, "node covariate")
    dyads = _existing(args.dyads, "dyad outcome")
    for p in (nodes, dyads):
        inputs[str(p)] = sha256(p)
    ids, cols = read_node_csv(nodes)
    y, observed = read_dyad_csv(dyads, ids, directed=directed)
    return ids, cols, y, observed


def cmd_dyadic_fit(args, inputs):
    from .dyadic import DyadicDataset, bootstrap, fit_composite, variance_report

    _, cols, y, observed = _dyadic_inputs(args, inputs, directed=not args.undirected)
    recipe_path = _existing(args.recipe, "recipe")
    inputs[str(recipe_path)] = sha256(recipe_path)
    recipe = read_recipe(recipe_path)
    ds = DyadicDataset.from_recipe(cols, y, recipe, directed=not args.undirected, observed=observed)
    fit = fit_composite(ds, args.family)
    rep = variance_report(fit)
    out = {"family": args.family, "names": fit.names, "theta": fit.theta, "vcov_kind": args.vcov,
           "se": rep.se(args.vcov), "vcov": rep.vcov(args.vcov), "loglik": fit.loglik,
           "converged": fit.converged, "iterations": fit.n_iter, "flags": rep.flags, "n": fit.n}
    if args.bootstrap:
        m = re.fullmatch(r"(weighted|pigeonhole|menzel-bsn):B=(\d+)", args.bootstrap)
        if not m:
            raise UserError("--bootstrap must look like weighted:B=999")
        bs = bootstrap(fit, m.group(1), int(m.group(2)), seed=args.seed)
        out["bootstrap"] = {"scheme": bs.scheme, "B": int(m.group(2)), "dropped": bs.dropped, "se": bs.se,
                            "ci": bs.ci, "level": bs.level}
    return out


def cmd_asf(args, inputs):
    from .asf import PolicyDataset, asf, complementarity, ate, fit_pvr

    _, cols, y, _ = _dyadic_inputs(args, inputs)
    needed = [args.ego_treatment, args.alter_treatment, *args.ego_proxies.split(","), *args.alter_proxies.split(",")]
    missing = [c for c in needed if c not in cols]
    if missing:
        raise UserError(f"node file lacks columns {missing}")
    r = np.column_stack([cols[c] for c in args.ego_proxies.split(",")])
    s = np.column_stack([cols[c] for c in args.alter_proxies.split(",")])
    data = PolicyDataset(cols[args.ego_treatment], cols[args.alter_treatment], r, s, y)
    terms = ("1", "w", "x", "w*x", "r", "s")
    if args.recipe:
        rp = _existing(args.recipe, "basis recipe")
        inputs[str(rp)] = sha256(rp)
        terms = tuple(read_recipe(rp))
    pvr = fit_pvr(data, args.family, terms)
    kw = {"kappa": args.kappa, "omega": args.omega}
    out = {"family": args.family, "terms": list(terms), "gamma": pvr.gamma, "diagnostics": pvr.diagnostics}
    if args.contrast:
        c = ate(pvr, **kw) if args.contrast == "ate" else complementarity(pvr, **kw)
        out["contrast"] = {"kind": args.contrast, "value": c.value, "se": c.se, "weights": list(c.weights)}
    else:
        e = asf(pvr, args.w, args.x, **kw)
        out["asf"] = {"w": e.w, "x": e.x, "value": e.value, "se": e.se, "variance_label": e.variance_label,
                      "proxy_term": e.xi, "first_stage_term": e.first_stage,
                      "influence_summary": {"mean": float(e.psi.mean()), "sd": float(e.psi.std()),
                                            "max_abs": float(np.abs(e.psi).max())},
                      "notes": e.notes}
    return out


def cmd_triad_probit(args, inputs):
    from .dyadic import DyadicDataset, build_features, read_node_csv
    from .triad_probit import fit_triad_probit

    cov = _existing(args.covariates, "covariate")
    edges = _existing(args.edges, "edge list")
    rp = _existing(args.recipe, "recipe")
    for p in (cov, edges, rp):
        inputs[str(p)] = sha256(p)
    ids, cols = read_node_csv(cov)
    d = read_labelled_edges(edges, ids)
    np.fill_diagonal(d, np.nan)
    feats, names = build_features(cols, read_recipe(rp), len(ids))
    fit = fit_triad_probit(DyadicDataset(d, feats, names, directed=True), draws=args.draws, seed=args.seed)
    return {"names": fit.names, "theta": fit.theta, "se_full": fit.se("full"), "se_leading": fit.se("leading"),
            "vcov_full": fit.vcov_full, "vcov_leading": fit.vcov_leading, "loglik": fit.loglik,
            "converged": fit.converged, "message": fit.message, "draws": fit.draws, "n": fit.n}


def cmd_strategic(args, inputs):
    from . import strategic as st

    cfg_path = _existing(args.config, "config")
    inputs[str(cfg_path)] = sha256(cfg_path)
    cfg = _load_config(cfg_path)

    def need(key):
        if key not in cfg:
            raise UserError(f"{cfg_path}: missing key {key!r}")
        return cfg[key]

    if args.action == "equilibria":
        params = st.TransitivityParams(float(need("alpha")), float(need("beta")), cfg.get("u_law", "dyad-logistic"))
        n, draws = int(need("n")), int(cfg.get("draws", 1))
        transfers = bool(cfg.get("transfers", True))
        rows = []
        for b in range(draws):
            eq = st.min_max_equilibria(params, st.draw_shocks(n, params.u_law, args.seed, b), transfers, b)
            rows.append({"draw": b, "edges_low": int(eq.low.sum() // 2), "edges_high": int(eq.high.sum() // 2),
                         "sweeps_low": eq.sweeps_low, "sweeps_high": eq.sweeps_high,
                         "moments_low": st.motif_frequencies(eq.low), "moments_high": st.motif_frequencies(eq.high)})
        return {"params": vars(params), "n": n, "transfers": transfers, "motifs": list(st.DEFAULT_MOTIFS),
                "draws": rows}
    if args.action == "smd":
        from .graph import load_edgelist

        ep = _existing(need("edges"), "edge list")
        inputs[str(ep)] = sha256(ep)
        g = load_edgelist(ep, n_hint=cfg.get("n"))
        observed, omega = st.observed_motif_moments(g)
        alphas = np.asarray(need("alpha_grid"), dtype=float)
        betas = np.asarray(need("beta_grid"), dtype=float)
        grid = np.array([(a, b) for a in alphas for b in betas])
        res = st.smd_fit(observed, omega, grid, g.n, int(cfg.get("B", 50)), args.seed, cfg.get("mode", "equality"),
                         cfg.get("u_law", "dyad-logistic"), slack=float(cfg.get("slack", 2.5)))
        out = {"mode": res.mode, "observed": observed, "omega": omega, "motifs": list(st.DEFAULT_MOTIFS),
               "grid": res.grid, "pi_high": res.pi_high, "caveat": res.caveat}
        if res.mode == "equality":
            out.update(theta_hat=res.theta_hat, objective=res.objective)
        else:
            out.update(pi_low=res.pi_low, identified_set=res.identified_set, empty=res.empty)
        return out
    if args.action == "leung":
        from .dyadic import build_features, read_node_csv

        cp = _existing(need("covariates"), "covariate")
        ep = _existing(need("edges"), "edge list")
        for p in (cp, ep):
            inputs[str(p)] = sha256(p)
        ids, cols = read_node_csv(cp)
        d = read_labelled_edges(ep, ids)
        feats, names = build_features(cols, need("recipe"), len(ids))
        fit = st.two_step_fit(d, feats, names, restricted=bool(cfg.get("restricted", False)))
        return {"names": fit.names, "theta": fit.theta, "restricted": fit.restricted,
                "belief_cells": int(len(np.unique(np.round(fit.p_hat[~np.eye(len(ids), dtype=bool)], 15))))}
    if args.action == "mele":
        n = int(need("n"))
        alpha = np.atleast_1d(np.asarray(need("alpha"), dtype=float))
        r = np.ones((n, n, 1)) if len(alpha) == 1 else None
        if r is None:
            from .dyadic import build_features, read_node_csv

            cp = _existing(need("covariates"), "covariate")
            inputs[str(cp)] = sha256(cp)
            _, cols = read_node_csv(cp)
            r, _ = build_features(cols, need("recipe"), n)
        params = st.MeetingParams(alpha, float(need("beta")), cfg.get("meeting"))
        steps = int(cfg.get("steps", 1_000_000))
        burn = int(cfg.get("burn_in", 0))
        record = n <= 5
        run = st.meeting_chain(np.zeros((n, n), dtype=np.int64), r, params, steps + burn, args.seed, burn, record)
        out = {"n": n, "steps": steps, "burn_in": burn, "flips": run.flips, "terminal_edges": int(run.terminal.sum() // 2)}
        if record:
            law = st.ergm_exact(n, r, params)
            freq = run.state_counts / run.state_counts.sum()
            out.update(tv_to_exact=st.total_variation(freq, law.probs), states_visited=int((run.state_counts > 0).sum()),
                       n_states=len(law.probs))
        return out
    raise UserError(f"unknown strategic action {args.action!r}")


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # the subcommand copies must not overwrite values given before the subcommand
        g = argparse.ArgumentParser(add_help=False)

        def default(value):
            return argparse.SUPPRESS if suppress else value

        g.add_argument("--seed", type=int, default=default(0), help="master seed (default 0)")
        g.add_argument("--threads", type=int, default=default(None), help="worker threads for compiled kernels")
        g.add_argument("--json", metavar="OUT", default=default(None),
                       help="write the JSON document here (default stdout)")
        return g

    common = global_flags(True)
    p = argparse.ArgumentParser(prog="netmetrics", description="Network econometrics toolkit.",
                                parents=[global_flags(False)])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="draw an exchangeable random graph")
    s.add_argument("--model", choices=["er", "beta", "threshold", "graphon"], required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--rho", type=float, default=0.1)
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=1.0, help="threshold level")
    s.add_argument("--grid", help="graphon grid file (model graphon)")
    s.add_argument("--out", required=True, help="edge-list output path")

    for name, hlp in (("moments", "subgraph counts, densities and covariance"),
                      ("transitivity", "transitivity index with its standard error")):
        m = sub.add_parser(name, parents=[common], help=hlp)
        m.add_argument("--edges", required=True)
        m.add_argument("--n", type=int, default=None, help="node count when isolates are not listed")
        m.add_argument("--cov", default="exact", help="exact | projection | subsample:M" +
                       (" | none" if name == "moments" else ""))
        if name == "moments":
            m.add_argument("--patterns", default="triangle,twostar")

    d = sub.add_parser("dyadic-fit", parents=[common], help="composite-likelihood dyadic regression")
    d.add_argument("--nodes", required=True, help="node covariate CSV with an id column")
    d.add_argument("--dyads", required=True, help="dyad outcome CSV with i,j,y rows")
    d.add_argument("--recipe", required=True, help="feature terms file")
    d.add_argument("--family", choices=["poisson", "logit", "probit", "gaussian"], default="poisson")
    d.add_argument("--vcov", choices=["fg", "jk", "jkbc", "analog", "leading"], default="fg")
    d.add_argument("--bootstrap", default=None, help="scheme:B=count, e.g. weighted:B=999")
    d.add_argument("--undirected", action="store_true")

    a = sub.add_parser("asf", parents=[common], help="average structural function under policy assignment")
    a.add_argument("--nodes", required=True)
    a.add_argument("--dyads", required=True)
    a.add_argument("--recipe", default=None, help="basis terms file (default 1,w,x,w*x,r,s)")
    a.add_argument("--family", choices=["poisson", "logit", "probit", "gaussian"], default="poisson")
    a.add_argument("--w", type=float, default=1.0)
    a.add_argument("--x", type=float, default=1.0)
    a.add_argument("--contrast", choices=["ate", "complementarity"], default=None)
    a.add_argument("--omega", choices=["fg", "jk", "jkbc", "analog"], default="fg")
    a.add_argument("--kappa", type=float, default=None, help="overlap floor")
    a.add_argument("--ego-treatment", default="w")
    a.add_argument("--alter-treatment", default="x")
    a.add_argument("--ego-proxies", default="r")
    a.add_argument("--alter-proxies", default="s")

    t = sub.add_parser("triad-probit", parents=[common], help="triad composite likelihood probit")
    t.add_argument("--edges", required=True, help="directed edge list over covariate ids")
    t.add_argument("--covariates", required=True)
    t.add_argument("--recipe", required=True)
    t.add_argument("--draws", type=int, default=512)

    g = sub.add_parser("strategic", parents=[common], help="strategic formation models")
    g.add_argument("action", choices=["equilibria", "smd", "leung", "mele"])
    g.add_argument("--config", required=True, help="JSON parameter file")
    return p


COMMANDS = {"simulate": cmd_simulate, "moments": cmd_moments, "transitivity": cmd_transitivity,
            "dyadic-fit": cmd_dyadic_fit, "asf": cmd_asf, "triad-probit": cmd_triad_probit,
            "strategic": cmd_strategic}


def _classify(exc: BaseException) -> int:
    from .dyadic import ConvergenceError
    from .triad_probit import ParameterRegionError

    if isinstance(exc, (ConvergenceError, np.linalg.LinAlgError, FloatingPointError, ParameterRegionError)):
        return EXIT_NUMERIC
    if isinstance(exc, (UserError, FileNotFoundError, ValueError, KeyError)):
        return EXIT_USER
    return EXIT_NUMERIC if isinstance(exc, (RuntimeError, ArithmeticError)) else EXIT_USER


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None:
        from ._kernels import set_threads

        set_threads(args.threads)
    inputs: dict = {}
    start = time.perf_counter()
    try:
        results = COMMANDS[args.command](args, inputs)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = _classify(exc)
        print(f"netmetrics {args.command}: error: {exc}", file=sys.stderr)
        return code
    doc = {
        "meta": {"version": __version__, "command": args.command, "argv": argv, "seed": args.seed,
                 "threads": args.threads, "wall_time_s": time.perf_counter() - start},
        "inputs": inputs,
        "results": results,
    }
    text = dumps(doc)
    if args.json:
        Path(args.json).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
