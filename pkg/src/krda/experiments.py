"""Benchmark protocols: rotated moons, Gaussian-mixture transfers, CSV pairs.

Every cell (task, training size, repeat) draws its seeds from
``SeedSequence(master_seed, spawn_key=cell key)``, so a cell's numbers depend
only on the master seed and the cell itself, not on which other cells run.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from .classifier import accuracy, svm_fit
from .data import Dataset, GmmSpec, MoonsSpec, gen_gmm, gen_moons, subsample
from .trainer import TrainConfig, fit_joint
from .transport import transfer_dataset

RESULT_FIELDS = ["suite", "task", "train_n", "repeat", "seed", "method", "metric", "value"]
SUMMARY_FIELDS = ["suite", "task", "train_n", "method", "metric", "mean", "ci95_half_width", "repeats"]
SUBSAMPLE_FRACTION = 0.9


@dataclass
class PipelineConfig:
    hidden: int = 50
    components: int = 5
    epochs: int = 300
    batch_size: int = 64
    learning_rate: float = 1e-3
    patience: Optional[int] = 30
    validation_fraction: float = 0.1
    svm_C: float = 1.0
    svm_gamma: object = "auto"
    noise: float = 0.1
    test_n: int = 1000
    workers: Optional[int] = 1


@dataclass
class ResultRow:
    suite: str
    task: str
    train_n: int
    repeat: int
    seed: int
    method: str
    metric: str
    value: float

    def as_list(self):
        return [self.suite, self.task, self.train_n, self.repeat, self.seed, self.method, self.metric, repr(float(self.value))]


def cell_seeds(master_seed: int, key: Sequence[int], count: int = 8) -> list:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]


def _train_cfg(cfg: PipelineConfig, seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
        seed=seed, validation_fraction=cfg.validation_fraction, patience=cfg.patience,
    )


def krda_accuracy_cell(source: Dataset, target: Dataset, test: Dataset, cfg: PipelineConfig,
                       seeds: Sequence[int]) -> dict:
    """One labelled-source / unlabelled-target cell: subsample, fit, transfer, classify."""
    src = subsample(source, SUBSAMPLE_FRACTION, seeds[0])
    tgt = subsample(target, SUBSAMPLE_FRACTION, seeds[1])
    unlabeled = Dataset(tgt.features, None, tgt.column_names)
    model = fit_joint(src, unlabeled, H=cfg.hidden, N=cfg.components, cfg=_train_cfg(cfg, seeds[2]))
    report = transfer_dataset(model, src, workers=cfg.workers)
    transferred = src.with_features(report.transferred)
    out = {
        ("krda", "accuracy"): accuracy(svm_fit(transferred, cfg.svm_C, cfg.svm_gamma, seeds[3]), test),
        ("source_only", "accuracy"): accuracy(svm_fit(src, cfg.svm_C, cfg.svm_gamma, seeds[3]), test),
        ("krda", "max_quantile_residual"): report.max_residual,
        ("krda", "transfer_failures"): float(len(report.failures)),
    }
    if tgt.labels is not None and len(set(tgt.labels.tolist())) == 2:
        out[("target_only", "accuracy")] = accuracy(svm_fit(tgt, cfg.svm_C, cfg.svm_gamma, seeds[3]), test)
    return out


def moons_rows(angles: Iterable[float], repeats: int, train_sizes: Iterable[int], cfg: PipelineConfig,
               master_seed: int = 0) -> list:
    rows = []
    for angle in angles:
        for train_n in train_sizes:
            for rep in range(repeats):
                key = (int(round(1000 * angle)), train_n, rep)
                seeds = cell_seeds(master_seed, key)
                source = gen_moons(MoonsSpec(train_n, cfg.noise, 0.0, seeds[4]))
                target = gen_moons(MoonsSpec(train_n, cfg.noise, angle, seeds[5]))
                test = gen_moons(MoonsSpec(cfg.test_n, cfg.noise, angle, seeds[6]))
                res = krda_accuracy_cell(source, target, test, cfg, seeds)
                task = f"{angle:g}"
                for (method, metric), value in res.items():
                    rows.append(ResultRow("moons", task, train_n, rep, seeds[7], method, metric, value))
    return rows


def circle_modes(m: int, dim: int = 2, radius: float = 3.0, std: float = 0.5, phase: float = 0.0) -> tuple:
    """``m`` equally weighted isotropic modes evenly spaced on a circle."""
    modes = []
    for k in range(m):
        theta = phase + 2.0 * math.pi * k / m
        mean = [radius * math.cos(theta), radius * math.sin(theta)] + [0.0] * (dim - 2)
        modes.append((1.0 / m, mean, [std * std] * dim))
    return tuple(modes)


def parse_gmm_task(task: str) -> tuple:
    m, n = task.split(":")
    return int(m), int(n)


def ks_per_marginal(a, b) -> list:
    return [float(stats.ks_2samp(a[:, j], b[:, j]).statistic) for j in range(a.shape[1])]


def energy_distance(a, b) -> float:
    """Two-sample energy distance ``2E|X-Y| - E|X-X'| - E|Y-Y'|``."""
    return float(2.0 * cdist(a, b).mean() - cdist(a, a).mean() - cdist(b, b).mean())


def gmm_transfer_cell(m: int, n: int, train_n: int, cfg: PipelineConfig, seeds: Sequence[int]) -> dict:
    source = gen_gmm(GmmSpec(circle_modes(m), train_n, seeds[4]))
    target = gen_gmm(GmmSpec(circle_modes(n, phase=math.pi / 2), train_n, seeds[5]))
    fresh = gen_gmm(GmmSpec(circle_modes(n, phase=math.pi / 2), train_n, seeds[6]))
    model = fit_joint(source, target, H=cfg.hidden, N=cfg.components, cfg=_train_cfg(cfg, seeds[2]))
    report = transfer_dataset(model, source, workers=cfg.workers)
    out = {}
    for method, pts in (("krda", report.transferred), ("raw", source.features)):
        ks = ks_per_marginal(pts, fresh.features)
        for j, v in enumerate(ks):
            out[(method, f"ks_x{j}")] = v
        out[(method, "ks_max")] = max(ks)
        out[(method, "energy")] = energy_distance(pts, fresh.features)
    out[("krda", "max_quantile_residual")] = report.max_residual
    return out


def gmm_rows(tasks: Iterable[str], repeats: int, train_sizes: Iterable[int], cfg: PipelineConfig,
             master_seed: int = 0) -> list:
    rows = []
    for task in tasks:
        m, n = parse_gmm_task(task)
        for train_n in train_sizes:
            for rep in range(repeats):
                seeds = cell_seeds(master_seed, (m, n, train_n, rep))
                for (method, metric), value in gmm_transfer_cell(m, n, train_n, cfg, seeds).items():
                    rows.append(ResultRow("gmm", task, train_n, rep, seeds[7], method, metric, value))
    return rows


def csv_rows(source: Dataset, target: Dataset, test: Dataset, repeats: int, cfg: PipelineConfig,
             master_seed: int = 0, task: str = "csv") -> list:
    if source.labels is None or test.labels is None:
        raise ValueError("source and test files need a label column")
    rows = []
    for rep in range(repeats):
        seeds = cell_seeds(master_seed, (source.n, target.n, rep))
        for (method, metric), value in krda_accuracy_cell(source, target, test, cfg, seeds).items():
            rows.append(ResultRow("csv", task, source.n, rep, seeds[7], method, metric, value))
    return rows


def ci95_half_width(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    sem = values.std(ddof=1) / math.sqrt(values.size)
    return float(stats.t.ppf(0.975, values.size - 1) * sem)


def summarize(rows: Sequence[ResultRow]) -> list:
    groups = {}
    for r in rows:
        groups.setdefault((r.suite, r.task, r.train_n, r.method, r.metric), []).append(r.value)
    out = []
    for key, vals in groups.items():
        out.append(list(key) + [repr(float(np.mean(vals))), repr(ci95_half_width(vals)), len(vals)])
    return out


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()


def summary_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    w.writerows(summarize(rows))
    return buf.getvalue()


def mean_metric(rows, task, method, metric, train_n=None) -> float:
    vals = [r.value for r in rows if r.task == task and r.method == method and r.metric == metric
            and (train_n is None or r.train_n == train_n)]
    return float(np.mean(vals))
