"""Command line entry point: ``lagnet <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace

import numpy as np

from .classifiers import MlpModel, extract_labels, fit_gmm, gmm_classify, train_ffnn, upper_triangle
from .estimators import KINDS, estimate, feasibility_margin, min_exogenous_variance
from .experiments import (DESK_N, ESTIMATORS, FULL_SCALE_N, AccuracyReport, FrozenParams, SweepConfig,
                          TrainParams, build_training_corpus, evaluate_cell, run_sweep)
from .features import build_features
from .graphs import erdos_renyi, laplacian_weights, load_edge_list, watts_strogatz
from .moments import LagMoments, empirical_lag_moments
from .noise import jittered_noise, offset_noise
from .plotting import write_svg
from .simulator import SimConfig, TimeSeries, restrict, simulate

log = logging.getLogger("lagnet")


def _node_list(text):
    return sorted(int(v) for v in text.split(",") if v.strip()) if text else None


def _read_graph(path):
    with open(path, "rb") as fh:
        return load_edge_list(fh)


def _noise_from_args(n_nodes, args):
    if args.jitter > 0:
        noise = jittered_noise(n_nodes, args.sigma_gap, args.beta, args.jitter, args.noise_seed)
    else:
        noise = offset_noise(n_nodes, args.sigma_gap, args.beta)
    return noise.with_exogenous(args.xi) if args.xi else noise


def _add_noise_args(p):
    p.add_argument("--rho", type=float, default=0.8, help="spectral radius of A (default 0.8)")
    p.add_argument("--beta", type=float, default=0.0, help="noise offset (mean off-diagonal)")
    p.add_argument("--sigma-gap", type=float, default=1.0, help="variance gap (default 1)")
    p.add_argument("--jitter", type=float, default=0.0, help="max off-diagonal jitter (default 0)")
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--xi", type=float, default=0.0, help="exogenous isotropic variance")


def cmd_gen_graph(args):
    if args.model == "er":
        g = erdos_renyi(args.nodes, args.p, args.seed)
    else:
        g = watts_strogatz(args.nodes, args.ring_degree, args.rewire_p, args.seed)
    text = g.to_edge_list()
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    log.info("%d nodes, %d edges, connected=%s", g.node_count, g.edge_count, g.is_connected())


def cmd_simulate(args):
    g = _read_graph(args.graph)
    a = laplacian_weights(g, args.rho)
    noise = _noise_from_args(g.node_count, args)
    cfg = SimConfig(burn_in=args.burn_in, extra_tail=args.tail, seed=args.seed)
    ts = simulate(a, noise, args.samples, cfg)
    observed = _node_list(args.observed)
    if observed:
        ts = restrict(ts, observed)
    ts.to_csv(args.output)
    print(json.dumps({"burn_in": cfg.burn_in, "extra_tail": cfg.extra_tail, "seed": cfg.seed,
                      "samples": ts.sample_count, "observed": list(ts.observed)}))


def cmd_moments(args):
    ts = TimeSeries.from_csv(args.input)
    observed = _node_list(args.observed)
    if observed:
        ts = restrict(ts, observed)
    LagMoments.dump(empirical_lag_moments(ts, args.d, args.m), args.output)


def cmd_estimate(args):
    est = estimate(LagMoments.load(args.moments), args.kind)
    est.to_csv(args.output)
    if args.gmm:
        sym = est.symmetrized()
        if est.kind == "precision":
            sym = np.abs(sym)
        support = gmm_classify(fit_gmm(upper_triangle(sym)), sym)
        np.savetxt(sys.stdout, support.astype(int), fmt="%d", delimiter=",")


def cmd_feasibility(args):
    g = _read_graph(args.graph)
    a = laplacian_weights(g, args.rho)
    noise = _noise_from_args(g.node_count, args)
    s = _node_list(args.observed) or list(range(g.node_count))
    rep = feasibility_margin(a, noise, s)
    sys.stdout.write(rep.to_text())
    print(f"min_exogenous_variance={min_exogenous_variance(a, noise)!r}")


def cmd_features(args):
    ts = TimeSeries.from_csv(args.input)
    fs = build_features(empirical_lag_moments(ts, args.d, args.m), args.kind)
    if args.graph:
        a = laplacian_weights(_read_graph(args.graph), args.rho)
        fs = fs.with_labels(extract_labels(a, ts.observed).labels)
    fs.to_csv(args.output)


def cmd_train(args):
    params = TrainParams(corpus_seed=args.corpus_seed, n_nodes=args.nodes,
                         n=FULL_SCALE_N if args.paper_scale else args.samples,
                         epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    corpus = build_training_corpus(params.corpus_seed, params, args.feature)
    model = train_ffnn(corpus, params.train_config())
    model.save(args.output)
    print(json.dumps({"train": asdict(params), "feature": args.feature,
                      "final_loss": model.loss_trace[-1], "pairs": len(corpus)}))


def _load_models(paths):
    models = {}
    for item in paths or []:
        name, _, path = item.partition("=")
        models[name] = MlpModel.load(path)
    return models


def cmd_evaluate(args):
    frozen = FrozenParams(**json.loads(args.params)) if args.params else FrozenParams()
    if args.paper_scale:
        frozen = replace(frozen, n=FULL_SCALE_N)
    acc = evaluate_cell(frozen, args.estimator, args.seed, _load_models(args.model))
    print(json.dumps({"estimator": args.estimator, "seed": args.seed, "accuracy": acc,
                      "frozen": asdict(frozen)}))


def cmd_sweep(args):
    cfg = SweepConfig.load(args.config)
    if args.paper_scale:
        cfg.frozen = replace(cfg.frozen, n=FULL_SCALE_N)
        cfg.train = replace(cfg.train, n=FULL_SCALE_N)
    if args.output:
        cfg.output_path = args.output
    if args.workers:
        cfg.workers = args.workers
    report = run_sweep(cfg, _load_models(args.model))
    for (x, name), (med, q25, q75) in report.aggregates().items():
        print(f"{cfg.axis}={x:g}\t{name}\tmedian={med:.3f}\tIQR=[{q25:.3f}, {q75:.3f}]")


def cmd_plot(args):
    write_svg(AccuracyReport.from_csv(args.report), args.output, xlabel=args.xlabel)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="generate a random graph as an edge list")
    p.add_argument("--model", choices=("er", "ws"), default="er")
    p.add_argument("--nodes", type=int, default=50)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--ring-degree", type=int, default=4)
    p.add_argument("--rewire-p", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("simulate", help="simulate the linear network dynamics to CSV")
    p.add_argument("--graph", required=True, help="edge-list file")
    _add_noise_args(p)
    p.add_argument("-n", "--samples", type=int, default=DESK_N)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--tail", type=int, default=50, help="extra trailing samples (max lag)")
    p.add_argument("--observed", help="comma separated node ids to keep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("moments", help="empirical lag moments, one R_<k>.csv per lag")
    p.add_argument("--input", required=True)
    p.add_argument("--d", type=int, default=-50)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--observed")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("estimate", help="matrix estimator from a moments directory")
    p.add_argument("--moments", required=True)
    p.add_argument("--kind", choices=KINDS, default="nig")
    p.add_argument("--gmm", action="store_true", help="also print the GMM support to stdout")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("feasibility", help="error matrix and feasibility inequality report")
    p.add_argument("--graph", required=True)
    _add_noise_args(p)
    p.add_argument("--observed")
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("features", help="per-pair F/T/K features to CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--graph", help="edge list for ground-truth labels")
    p.add_argument("--rho", type=float, default=0.8)
    p.add_argument("--kind", choices=("f", "t", "k"), default="k")
    p.add_argument("--d", type=int, default=-50)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="build the training corpus and fit the MLP")
    p.add_argument("--corpus-seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=TrainParams.n_nodes)
    p.add_argument("-n", "--samples", type=int, default=DESK_N)
    p.add_argument("--paper-scale", action="store_true", help=f"use n={FULL_SCALE_N}")
    p.add_argument("--feature", choices=("k", "f"), default="k")
    p.add_argument("--epochs", type=int, default=TrainParams.epochs)
    p.add_argument("--lr", type=float, default=TrainParams.learning_rate)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="accuracy of one estimator on one generated cell")
    p.add_argument("--estimator", choices=ESTIMATORS, required=True)
    p.add_argument("--params", help="JSON object overriding frozen parameters")
    p.add_argument("--model", action="append", help="NAME=PATH of a trained model")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run a sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--model", action="append", help="NAME=PATH of a trained model")
    p.add_argument("--paper-scale", action="store_true", help=f"use n={FULL_SCALE_N} throughout")
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render report.csv as an SVG line plot")
    p.add_argument("--report", required=True)
    p.add_argument("--xlabel", default="")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"lagnet {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
