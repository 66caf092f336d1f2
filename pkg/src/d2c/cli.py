"""d2c command line: gen, train, predict, eval.

Logs go to stderr; data goes to files or stdout. Every run is a pure
function of its config file (seed included).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .config import (
    ConfigError,
    DescriptorConfig,
    ExperimentConfig,
    GenConfig,
    TrainConfig,
    load_config,
    parse_seed,
    to_dict,
)
from .dag import hide_variables, load_dataset, sample_dag, save_dataset, simulate
from .descriptors import DescriptorVector, compute_descriptor, save_descriptors
from .forest import ModelFormatError, load_model, predict_proba, save_model

log = logging.getLogger("d2c")


def _seed(cfg, override):
    if override is not None:
        cfg.seed = parse_seed(override)
    return cfg.seed


def cmd_gen(args) -> int:
    cfg = load_config(GenConfig, args.config)
    seed = _seed(cfg, args.seed)
    s_dag, s_sim, s_hide = np.random.SeedSequence(seed).generate_state(3)
    dag = sample_dag(
        cfg.size_class, cfg.n_nodes, cfg.max_parents, cfg.dep_type, int(s_dag), cfg.n_nodes_range
    )
    ds = simulate(dag, cfg.n_samples, int(s_sim))
    ds = hide_variables(ds, cfg.hide_fraction, cfg.protected, int(s_hide))
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = save_dataset(ds, dag, out)
    log.info(
        "%d nodes, %d edges, %d hidden; wrote %s and %s",
        dag.n_nodes, len(dag.edges), len(ds.hidden_ids), out, sidecar,
    )
    return 0


def cmd_train(args) -> int:
    cfg = load_config(TrainConfig, args.config)
    seed = _seed(cfg, args.seed)
    ts = bench.build_training_set(cfg.train, seed, cfg.descriptor, n_jobs=args.threads)
    log.info("%d pairs (%d/%d)", len(ts), ts.positive_count, ts.negative_count)
    model = bench.fit(ts, cfg.forest, seed, args.threads)
    model.meta = {"descriptor": to_dict(cfg.descriptor)}
    Path(cfg.model).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, cfg.model)
    if cfg.descriptors_csv:
        rows = [
            DescriptorVector(i, j, x, bool(lab))
            for (i, j), x, lab in zip(ts.pairs, ts.X, ts.y)
        ]
        save_descriptors(rows, cfg.descriptors_csv)
    log.info("wrote %s", cfg.model)
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    ds, _ = load_dataset(args.dataset)
    dcfg = DescriptorConfig.from_dict(model.meta.get("descriptor", {}))
    d = compute_descriptor(ds, args.i, args.j, dcfg.K, dcfg.filter, dcfg.estimator_config())
    score = predict_proba(model, d.features)
    if args.emit_descriptor:
        print(json.dumps({"i": args.i, "j": args.j, "score": score, "descriptor": d.features.tolist()}))
    else:
        print(repr(score))
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(ExperimentConfig, args.config)
    _seed(cfg, args.seed)
    if args.baseline:
        cfg.baseline = True
    exp = bench.run_experiment(cfg, n_jobs=args.threads)
    bench.write_experiment(exp, cfg.out_dir)
    r = exp.report
    log.info("BER %.4f  AUPRC %.4f  (%d test DAGs)", r.ber, r.auprc, r.n_test_dags)
    if r.baseline_auprc is not None:
        log.info("baseline AUPRC %.4f", r.baseline_auprc)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d2c", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config file")
            p.add_argument("--seed", help="override the config seed (unsigned 64-bit)")
        p.add_argument("--threads", type=int, default=1, help="worker cap")

    p = sub.add_parser("gen", help="simulate one DAG dataset (CSV + JSON sidecar)")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="build a training set and fit the forest")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score the causal link i -> j in a dataset")
    common(p, config=False)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True, help="CSV written by `d2c gen`")
    p.add_argument("i", type=int)
    p.add_argument("j", type=int)
    p.add_argument("--emit-descriptor", action="store_true", help="print the full descriptor as JSON")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="train/test experiment with BER and AUPRC")
    common(p)
    p.add_argument("--baseline", action="store_true", help="also score the partial-correlation baseline")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.threads < 1:
        log.error("--threads must be >= 1")
        return 2
    try:
        return args.func(args)
    except ConfigError as e:
        log.error("%s", e)
        return 2
    except (ModelFormatError, FileNotFoundError, KeyError, ValueError, OSError) as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
