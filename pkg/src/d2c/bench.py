"""Training-set construction, metrics, the partial-correlation baseline and experiments."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .config import DescriptorConfig, ExperimentConfig, ForestConfig, PairSetConfig, to_dict
from .dag import Dataset, PairSamplingError, hide_variables, sample_dag, sample_pairs, simulate
from .descriptors import DescriptorVector, blanket, compute_descriptors
from .forest import ForestModel, TrainingSet, predict_proba, train_forest
from .infoth import DegenerateInputError
from .mb import mb_minus

log = logging.getLogger(__name__)

THRESHOLD = 0.5
MAX_DAG_RETRIES = 50
TRAIN_ROLE, TEST_ROLE = 0, 1


# -- metrics -----------------------------------------------------------------

def confusion(labels, predictions) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn)."""
    y = np.asarray(labels, dtype=bool)
    p = np.asarray(predictions, dtype=bool)
    if y.shape != p.shape:
        raise ValueError("labels and predictions differ in length")
    return (
        int(np.sum(y & p)),
        int(np.sum(~y & p)),
        int(np.sum(~y & ~p)),
        int(np.sum(y & ~p)),
    )


def ber_from_confusion(tp: int, fp: int, tn: int, fn: int) -> float:
    if tp + fn == 0 or fp + tn == 0:
        raise ValueError("balanced error rate needs both classes in the labels")
    return 0.5 * (fn / (tp + fn) + fp / (fp + tn))


def ber(labels, predictions) -> float:
    return ber_from_confusion(*confusion(labels, predictions))


def auprc(scores, labels) -> float:
    """Area under the step precision-recall curve, thresholds swept over distinct scores.

    Equal scores enter together, so each distinct score contributes
    (recall gain) x (precision at that score).
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise ValueError("AUPRC needs both classes in the labels")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tp = np.cumsum(y)[last]
    precision = tp / (last + 1)
    recall_gain = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(recall_gain * precision))


# -- per-DAG work ----------------------------------------------------------------

def dag_seed(seed: int, role: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, role, k]).generate_state(1, np.uint64)[0])


def partial_correlation(x, y, Z=None) -> float:
    """Correlation of the residuals of x and y after linear regression on Z."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.ones((len(x), 1))
    if Z is not None and np.size(Z):
        A = np.column_stack([A, np.asarray(Z, dtype=float).reshape(len(x), -1)])
    coef, *_ = np.linalg.lstsq(A, np.column_stack([x, y]), rcond=None)
    r = np.column_stack([x, y]) - A @ coef
    rx, ry = r[:, 0], r[:, 1]
    sx, sy = np.dot(rx, rx), np.dot(ry, ry)
    if sx <= 1e-12 * len(x) or sy <= 1e-12 * len(x):
        raise DegenerateInputError("degenerate residuals in partial correlation")
    return float(np.dot(rx, ry) / np.sqrt(sx * sy))


def baseline_parcorr(ds: Dataset, i: int, j: int, cache: dict | None = None, n_cov: int = 3) -> float:
    """|partial correlation of (i, j)| given the top MI-ranked covariates of j.

    Direction-blind: it can only say whether a link exists.
    """
    if i == j:
        raise ValueError("pair members must differ")
    for v in (i, j):
        if ds.column(v).std() == 0:
            raise DegenerateInputError(f"column {v} has zero variance")
    K = max(1, min(n_cov + 1, len(ds.column_ids) - 1))
    r = mb_minus(blanket(ds, j, K, "mi", DescriptorConfig().estimator_config(), cache), i)
    cov = r.members[:n_cov]
    Z = np.column_stack([ds.column(c) for c in cov]) if cov else None
    return abs(partial_correlation(ds.column(i), ds.column(j), Z))


@dataclass
class DagRecord:
    seed: int
    n_nodes: int
    n_samples: int
    descriptors: list
    baseline: list | None = None


def process_dag(
    pcfg: PairSetConfig,
    dcfg: DescriptorConfig,
    seed: int,
    with_baseline: bool = False,
) -> DagRecord:
    """Draw one DAG, simulate, hide 5% of nodes, sample pairs, compute descriptors.

    DAGs without enough observed edges are redrawn from the next substream.
    """
    for attempt in range(MAX_DAG_RETRIES):
        s_dag, s_n, s_sim, s_hide, s_pairs, s_desc = np.random.SeedSequence([seed, attempt]).generate_state(6)
        dag = sample_dag(
            pcfg.size_class, None, pcfg.max_parents, pcfg.dep_type, int(s_dag), pcfg.n_nodes_range
        )
        lo, hi = pcfg.n_samples_range
        n_samples = int(np.random.default_rng(s_n).integers(lo, hi + 1))
        ds = simulate(dag, n_samples, int(s_sim))
        ds = hide_variables(ds, pcfg.hide_fraction, (), int(s_hide))
        try:
            pairs = sample_pairs(dag, ds, pcfg.pos_per_dag, pcfg.neg_per_dag, int(s_pairs))
        except PairSamplingError as e:
            log.debug("dag seed %d attempt %d: %s", seed, attempt, e)
            continue
        desc = compute_descriptors(
            ds, pairs, dcfg.K, dcfg.filter, dcfg.estimator_config(), int(s_desc)
        )
        base = None
        if with_baseline:
            cache: dict = {}
            base = [baseline_parcorr(ds, p.i, p.j, cache) for p in pairs]
        return DagRecord(seed, dag.n_nodes, n_samples, desc, base)
    raise PairSamplingError(f"no usable DAG after {MAX_DAG_RETRIES} draws for seed {seed}")


def process_dags(pcfg, dcfg, seeds, with_baseline=False, n_jobs=1) -> list[DagRecord]:
    if n_jobs == 1:
        return [process_dag(pcfg, dcfg, s, with_baseline) for s in seeds]
    return Parallel(n_jobs=n_jobs)(delayed(process_dag)(pcfg, dcfg, s, with_baseline) for s in seeds)


def records_to_training_set(records: list[DagRecord], pairs_per_dag: int) -> TrainingSet:
    rows = [d for r in records for d in r.descriptors]
    row_ids = [k * pairs_per_dag + p for k, r in enumerate(records) for p in range(len(r.descriptors))]
    return TrainingSet.from_descriptors(rows, np.array(row_ids))


def build_training_set(
    pcfg: PairSetConfig,
    seed: int,
    dcfg: DescriptorConfig | None = None,
    n_jobs: int = 1,
) -> TrainingSet:
    """``pos_per_dag`` positive and ``neg_per_dag`` negative descriptors from each of ``n_dags`` DAGs."""
    dcfg = dcfg or DescriptorConfig()
    seeds = [dag_seed(seed, TRAIN_ROLE, k) for k in range(pcfg.n_dags)]
    records = process_dags(pcfg, dcfg, seeds, n_jobs=n_jobs)
    return records_to_training_set(records, pcfg.pairs_per_dag)


# -- experiments ---------------------------------------------------------------

@dataclass
class EvalReport:
    ber: float
    auprc: float
    confusion: tuple[int, int, int, int]
    n_test_dags: int
    n_train_pairs: int = 0
    baseline_auprc: float | None = None
    curve: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.ber <= 1:
            raise ValueError("ber must lie in [0, 1]")

    def to_dict(self) -> dict:
        tp, fp, tn, fn = self.confusion
        return {
            "ber": self.ber,
            "auprc": self.auprc,
            "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
            "n_test_dags": self.n_test_dags,
            "n_train_pairs": self.n_train_pairs,
            "baseline_auprc": self.baseline_auprc,
            "curve": self.curve,
            "config": self.config,
        }


def evaluate(model: ForestModel, rows: list[DescriptorVector], n_dags: int = 0):
    """Scores and report for labeled descriptor rows."""
    X = np.array([r.features for r in rows])
    y = np.array([r.label for r in rows], dtype=bool)
    scores = predict_proba(model, X)
    cm = confusion(y, scores >= THRESHOLD)
    return EvalReport(ber_from_confusion(*cm), auprc(scores, y), cm, n_dags), scores


def fit(ts: TrainingSet, fcfg: ForestConfig, seed: int, n_threads: int = 1) -> ForestModel:
    return train_forest(ts, None, fcfg.n_trees, fcfg.mtry, fcfg.min_leaf, seed, n_threads)


def shuffled(ts: TrainingSet, seed: int) -> TrainingSet:
    rng = np.random.default_rng([seed, 7])
    return TrainingSet(ts.X, rng.permutation(ts.y), ts.row_ids, ts.pairs)


@dataclass
class Experiment:
    """Everything ``run_experiment`` produced, kept for tests and writers."""

    report: EvalReport
    model: ForestModel
    train_records: list
    test_records: list
    scores: np.ndarray


def run_experiment(cfg: ExperimentConfig, seed: int | None = None, n_jobs: int = 1) -> Experiment:
    """Train on ``cfg.train`` DAGs, evaluate on fresh ``cfg.test`` DAGs.

    With ``training_sizes`` the training DAG list is truncated to each size in
    turn (prefixes of one seed list) and BER/AUPRC are recorded per size; the
    headline model uses the full ``cfg.train.n_dags``.
    """
    seed = cfg.seed if seed is None else seed
    train_seeds = [dag_seed(seed, TRAIN_ROLE, k) for k in range(cfg.train.n_dags)]
    test_seeds = [dag_seed(seed, TEST_ROLE, k) for k in range(cfg.test.n_dags)]
    if set(train_seeds) & set(test_seeds):
        raise RuntimeError("train and test DAG seeds overlap")
    per = cfg.train.pairs_per_dag
    need = max([cfg.train.n_dags] + [s // per for s in cfg.training_sizes])
    if need > cfg.train.n_dags:
        train_seeds += [dag_seed(seed, TRAIN_ROLE, k) for k in range(cfg.train.n_dags, need)]

    log.info("building %d training DAGs", len(train_seeds))
    train_records = process_dags(cfg.train, cfg.descriptor, train_seeds, n_jobs=n_jobs)
    log.info("building %d test DAGs", len(test_seeds))
    test_records = process_dags(cfg.test, cfg.descriptor, test_seeds, cfg.baseline, n_jobs=n_jobs)
    test_rows = [d for r in test_records for d in r.descriptors]

    def train_on(n_dags):
        ts = records_to_training_set(train_records[:n_dags], per)
        if cfg.shuffle_labels:
            ts = shuffled(ts, seed)
        return ts, fit(ts, cfg.forest, seed, n_jobs)

    curve = []
    for size in cfg.training_sizes:
        ts, model = train_on(size // per)
        rep, _ = evaluate(model, test_rows)
        curve.append({"train_pairs": len(ts), "ber": rep.ber, "auprc": rep.auprc})
        log.info("training size %d: BER %.4f", len(ts), rep.ber)

    ts, model = train_on(cfg.train.n_dags)
    log.info("%d pairs (%d/%d)", len(ts), ts.positive_count, ts.negative_count)
    report, scores = evaluate(model, test_rows, len(test_records))
    report.n_train_pairs = len(ts)
    report.curve = curve
    report.config = to_dict(cfg)
    report.config["seed"] = str(seed)
    if cfg.baseline:
        base = np.array([b for r in test_records for b in r.baseline])
        report.baseline_auprc = auprc(base, [d.label for d in test_rows])
    return Experiment(report, model, train_records, test_records, scores)


def write_experiment(exp: Experiment, out_dir) -> None:
    """report.json, pairs.csv (per-pair scores) and ber_curve.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(exp.report.to_dict(), indent=2, sort_keys=True) + "\n")
    with open(out / "pairs.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        has_base = exp.report.baseline_auprc is not None
        w.writerow(["dag", "i", "j", "label", "score"] + (["baseline_score"] if has_base else []))
        k = 0
        for d_idx, rec in enumerate(exp.test_records):
            for p, d in enumerate(rec.descriptors):
                row = [d_idx, d.i, d.j, int(d.label), repr(float(exp.scores[k]))]
                if has_base:
                    row.append(repr(float(rec.baseline[p])))
                w.writerow(row)
                k += 1
    with open(out / "ber_curve.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["train_pairs", "ber", "auprc"])
        for row in exp.report.curve:
            w.writerow([row["train_pairs"], repr(row["ber"]), repr(row["auprc"])])
