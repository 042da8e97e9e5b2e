"""Command-line experiment runner: baselines, ablations and GA searches.

Every command writes a config echo (all effective parameters) plus CSV and
Markdown tables into ``--out``. Outputs depend only on the config, so reruns
are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import correlation, ga, magnitude, mlp, svm
from .dataset import (
    Dataset,
    DatasetError,
    FeatureMask,
    SplitSpec,
    SyntheticSpec,
    kfold,
    load_csv,
    split,
    standardize,
    synthesize,
    write_csv,
)
from .seeding import derive_seed

log = logging.getLogger("featsel")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

DESK = {"epochs": 500, "pop": 20, "gen": 10, "runs": 10}
FULL_SCALE = {"epochs": 10000, "pop": 60, "gen": 100, "runs": 20}
MODEL_LABEL = {"svm": "SVM", "ann": "ANN"}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    technique: str
    data: str | None = None  # CSV path; None means synthetic
    synthetic: dict = field(default_factory=lambda: asdict(SyntheticSpec()))
    model: str = "both"
    seed: int = 0
    out: str = "results"
    standardize: bool = True
    train_fraction: float = 0.7
    validation_fraction: float = 0.3
    epochs: int = DESK["epochs"]
    learning_rate: float = mlp.TrainConfig.learning_rate
    weight_decay: float = mlp.TrainConfig.weight_decay
    hidden: tuple[int, ...] = (18, 16, 8)
    svm_C: float = svm.SvmConfig.C
    svm_tolerance: float = svm.SvmConfig.tolerance
    svm_max_passes: int = svm.SvmConfig.max_passes
    gamma: float | None = None
    ablate: int = 4
    runs: int = DESK["runs"]
    kfold: int | None = None
    strategy: str = "tournament"
    pop: int = DESK["pop"]
    gen: int = DESK["gen"]
    crossover_rate: float = 0.9
    mutation_rate: float | None = None
    elitism: int = 1
    tournament_size: int | None = None
    paper_scale: bool = False

    def models(self) -> list[str]:
        return ["svm", "ann"] if self.model == "both" else [self.model]

    def echo(self) -> dict:
        """Every effective parameter, with derived defaults filled in."""
        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        doc["data_source"] = self.data if self.data else "synthetic"
        doc["derived_seeds"] = {p: derive_seed(self.seed, p) for p in ("split", "validation", "model", "ga", "magnitude")}
        doc["adam"] = {"beta1": mlp.TrainConfig.beta1, "beta2": mlp.TrainConfig.beta2, "eps": mlp.TrainConfig.eps}
        doc["gamma_effective"] = "auto (1 / n_active_features)" if self.gamma is None else self.gamma
        doc["mutation_rate_effective"] = "1 / n_features" if self.mutation_rate is None else self.mutation_rate
        if self.technique == "ga":
            doc["tournament_size_effective"] = ga.GaConfig(
                population_size=self.pop, strategy="tournament", tournament_size=self.tournament_size
            ).effective_tournament_size
        return doc


@dataclass
class ReportTable:
    name: str
    columns: list[str]
    rows: list[list]
    title: str = ""

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"table {self.name}: row {r} does not match {len(self.columns)} columns")

    @staticmethod
    def cell(v) -> str:
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.4f}"
        return str(v)

    def to_markdown(self) -> str:
        lines = []
        if self.title:
            lines += [f"### {self.title}", ""]
        lines.append("| " + " | ".join(self.columns) + " |")
        lines.append("|" + "|".join("---" for _ in self.columns) + "|")
        for r in self.rows:
            lines.append("| " + " | ".join(self.cell(v) for v in r) + " |")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([self.cell(v) for v in r])
        return buf.getvalue()


def emit_report(tables: Sequence[ReportTable], out_dir, formats=("md", "csv")) -> list[Path]:
    if not tables:
        raise ValueError("no tables to write")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for t in tables:
        for fmt in formats:
            path = out / f"{t.name}.{fmt}"
            path.write_text(t.to_markdown() if fmt == "md" else t.to_csv(), encoding="utf-8")
            written.append(path)
    return written


def write_config(cfg: ExperimentConfig, name: str) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}_config.json"
    path.write_text(json.dumps(cfg.echo(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def threads_from_env() -> int:
    raw = os.environ.get("FEATSEL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"FEATSEL_THREADS must be an integer, got {raw!r}") from None


# --- experiment plumbing ---------------------------------------------------

def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data:
        return load_csv(cfg.data)
    return synthesize(SyntheticSpec(**cfg.synthetic))


def dev_test(cfg: ExperimentConfig, ds: Dataset) -> tuple[Dataset, Dataset]:
    return split(ds, SplitSpec(cfg.train_fraction, True, derive_seed(cfg.seed, "split")))


def train_config(cfg: ExperimentConfig) -> mlp.TrainConfig:
    return mlp.TrainConfig(learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay, epochs=cfg.epochs)


def evaluator(cfg: ExperimentConfig, model: str, dev: Dataset, test: Dataset | None) -> ga.WrapperEvaluator:
    return ga.WrapperEvaluator(
        dev,
        test,
        model,
        cfg.seed,
        standardize_features=cfg.standardize,
        validation_fraction=cfg.validation_fraction,
        train_cfg=train_config(cfg),
        svm_cfg=svm.SvmConfig(C=cfg.svm_C, tolerance=cfg.svm_tolerance, max_passes=cfg.svm_max_passes),
        kernel=svm.KernelSpec(gamma=cfg.gamma),
        hidden=tuple(cfg.hidden),
    )


def run_baseline(cfg: ExperimentConfig, threads: int = 1) -> list[ReportTable]:
    ds = load_dataset(cfg)
    dev, test = dev_test(cfg, ds)
    rows = []
    for model in cfg.models():
        train_acc, test_acc = evaluator(cfg, model, dev, test).train_test(FeatureMask.full(ds.n_features))
        rows.append([MODEL_LABEL[model], train_acc, test_acc])
    tables = [ReportTable("baseline", ["Model", "Final Train Accuracy", "Test Accuracy"], rows, "Baseline")]
    if cfg.kfold:
        tables.append(kfold_table(cfg, ds))
    return tables


def kfold_table(cfg: ExperimentConfig, ds: Dataset) -> ReportTable:
    folds = kfold(ds, cfg.kfold, derive_seed(cfg.seed, "split"))
    rows = []
    for model in cfg.models():
        accs = []
        for tr_idx, va_idx in folds:
            ev = evaluator(cfg, model, ds.subset(tr_idx), ds.subset(va_idx))
            accs.append(ev.train_test(FeatureMask.full(ds.n_features)))
        tr, va = np.mean(accs, axis=0)
        rows.append([MODEL_LABEL[model], f"{cfg.kfold}-Fold Cross-validation", float(tr), float(va)])
    return ReportTable(
        "baseline_kfold", ["Model", "Validation Method", "Training Accuracy", "Test Accuracy"], rows,
        "Cross-validated baseline",
    )


def ablation_table(cfg, name, title, dev, test, masks, removed_labels) -> ReportTable:
    columns = ["Removed", "Mask"] + [f"{MODEL_LABEL[m]} Test Accuracy" for m in cfg.models()]
    evs = {m: evaluator(cfg, m, dev, test) for m in cfg.models()}
    rows = []
    for mask, label in zip(masks, removed_labels):
        rows.append([label, str(mask)] + [evs[m].test_accuracy(mask) for m in cfg.models()])
    return ReportTable(name, columns, rows, title)


def _removed_labels(ranking, k):
    return ["none"] + [",".join(ranking[:j]) for j in range(1, k + 1)]


def run_correlation(cfg: ExperimentConfig, threads: int = 1) -> list[ReportTable]:
    ds = load_dataset(cfg)
    dev, test = dev_test(cfg, ds)
    rep = correlation.rank_features(dev)
    ranks = rep.abs_rank()
    corr_table = ReportTable(
        "correlation_ranking",
        ["feature", "r", "abs_rank"],
        [[n, r, ranks[n]] for n, r in zip(rep.feature_names, rep.r)],
        "Feature-label correlation (rank 1 = lowest |r|)",
    )
    masks = [FeatureMask.full(ds.n_features)] + correlation.ablation_masks(rep, cfg.ablate)
    abl = ablation_table(
        cfg, "correlation_ablation", "Removing the lowest-correlated features", dev, test, masks,
        _removed_labels(rep.ranking, cfg.ablate),
    )
    return [corr_table, abl]


def run_magnitude(cfg: ExperimentConfig, threads: int = 1) -> list[ReportTable]:
    ds = load_dataset(cfg)
    dev, test = dev_test(cfg, ds)
    train_set = standardize(dev)[0][0] if cfg.standardize else dev
    arch = mlp.MlpArchitecture.for_inputs(ds.n_features, tuple(cfg.hidden))
    rep = magnitude.averaged_ranking(
        train_set, arch, train_config(cfg), cfg.runs, derive_seed(cfg.seed, "magnitude"), threads
    )
    ranks = rep.rank_of()
    scores = ReportTable(
        "magnitude_ranking",
        ["feature", "mean_score", "std_score", "rank"],
        [[n, m, s, ranks[n]] for n, m, s in zip(rep.feature_names, rep.mean_scores, rep.std_scores)],
        f"Magnitude measure averaged over {rep.n_runs} runs (rank 1 = least important)",
    )
    per_run = ReportTable(
        "magnitude_runs",
        ["run", "seed"] + list(rep.feature_names),
        [[i, s] + [float(v) for v in row] for i, (s, row) in enumerate(zip(rep.run_seeds, rep.per_run_scores))],
    )
    masks = [FeatureMask.full(ds.n_features)] + magnitude.ablation_masks(rep, cfg.ablate)
    abl = ablation_table(
        cfg, "magnitude_ablation", "Removing the least important inputs", dev, test, masks,
        _removed_labels(rep.ranking, cfg.ablate),
    )
    return [scores, per_run, abl]


def run_ga(cfg: ExperimentConfig, threads: int = 1) -> list[ReportTable]:
    ds = load_dataset(cfg)
    dev, test = dev_test(cfg, ds)
    tables = []
    for model in cfg.models():
        ev = evaluator(cfg, model, dev, test)
        gcfg = ga.GaConfig(
            n_features=ds.n_features,
            population_size=cfg.pop,
            generations=cfg.gen,
            crossover_rate=cfg.crossover_rate,
            mutation_rate=cfg.mutation_rate,
            elitism_count=cfg.elitism,
            master_seed=cfg.seed,
            strategy=cfg.strategy,
            tournament_size=cfg.tournament_size,
        )
        best, evo = ga.evolve(gcfg, ev, threads)
        baseline = ev.test_accuracy(FeatureMask.full(ds.n_features))
        stem = f"ga_{model}_{cfg.strategy}"
        tables.append(ReportTable(
            f"{stem}_log",
            ["generation", "best_fitness", "mean_fitness", "best_mask", "evals"],
            [[g.generation, g.best_fitness, g.mean_fitness, str(g.best.mask), g.evaluations] for g in evo.generations],
        ))
        tables.append(ReportTable(
            f"{stem}_summary",
            ["Model", "Selection", "Population/Generation", "DNA", "Validation Accuracy",
             "Test Accuracy", "Baseline", "Improvement"],
            [[MODEL_LABEL[model], cfg.strategy, f"{cfg.pop}/{cfg.gen}", str(best.mask), best.fitness,
              evo.test_accuracy, baseline, f"{evo.test_accuracy - baseline:+.4f}"]],
            f"GA applied with {MODEL_LABEL[model]}",
        ))
    return tables


def run_gen_data(cfg: ExperimentConfig, threads: int = 1) -> list[ReportTable]:
    ds = synthesize(SyntheticSpec(**cfg.synthetic))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out / "synthetic.csv")
    calm, stressed = ds.class_counts()
    return [ReportTable("synthetic_summary", ["records", "features", "calm", "stressful"],
                        [[len(ds), ds.n_features, calm, stressed]])]


def run_report(cfg: ExperimentConfig, threads: int = 1) -> Path:
    out = Path(cfg.out)
    parts = sorted(p for p in out.glob("*.md") if p.name != "REPORT.md")
    if not parts:
        raise UsageError(f"no Markdown tables in {out}")
    body = ["# Feature selection report", ""]
    for p in parts:
        body += [f"## {p.stem}", "", p.read_text(encoding="utf-8")]
    path = out / "REPORT.md"
    path.write_text("\n".join(body), encoding="utf-8")
    return path


RUNNERS = {
    "gen-data": run_gen_data,
    "baseline": run_baseline,
    "correlate": run_correlation,
    "magnitude": run_magnitude,
    "ga": run_ga,
}


def run(cfg: ExperimentConfig, threads: int = 1) -> list[Path]:
    """Execute one experiment and write its artifacts; returns the written paths."""
    if cfg.technique == "report":
        return [run_report(cfg, threads)]
    if cfg.data and not Path(cfg.data).is_file():
        raise UsageError(f"data file not found: {cfg.data}")
    tables = RUNNERS[cfg.technique](cfg, threads)
    name = cfg.technique
    if name == "ga":
        name = f"ga_{cfg.model}_{cfg.strategy}"
    paths = [write_config(cfg, name)]
    paths += emit_report(tables, cfg.out)
    return paths


# --- command line -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="featsel", description="Feature-selection experiments on stress-style tabular data.")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model_default="both"):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--data", help="CSV dataset path ('synthetic' selects the generator)")
        src.add_argument("--synthetic", action="store_true", help="use the synthetic generator (default)")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.add_argument("--out", default="results")
        sp.add_argument("--model", choices=["svm", "ann", "both"], default=model_default)
        sp.add_argument("--paper-scale", action="store_true", help="epochs 10000, pop 60, gen 100, runs 20")
        sp.add_argument("--epochs", type=_positive_int)
        sp.add_argument("--learning-rate", type=float, default=mlp.TrainConfig.learning_rate)
        sp.add_argument("--weight-decay", type=float, default=mlp.TrainConfig.weight_decay)
        sp.add_argument("--hidden", default="18,16,8", help="comma-separated hidden layer sizes")
        sp.add_argument("--svm-c", type=float, default=svm.SvmConfig.C)
        sp.add_argument("--gamma", type=float, help="fixed RBF gamma (default: auto)")
        sp.add_argument("--no-standardize", action="store_true")
        sp.add_argument("--train-fraction", type=float, default=0.7)
        sp.add_argument("--validation-fraction", type=float, default=0.3)
        synth_flags(sp)

    def synth_flags(sp):
        sp.add_argument("--n-records", type=_positive_int, default=SyntheticSpec.n_records)
        sp.add_argument("--informative", type=int, default=SyntheticSpec.n_informative)
        sp.add_argument("--noise-features", type=int, default=SyntheticSpec.n_noise)
        sp.add_argument("--separation", type=float, default=SyntheticSpec.class_separation)
        sp.add_argument("--label-noise", type=float, default=SyntheticSpec.label_noise_rate)
        sp.add_argument("--data-seed", type=int, default=SyntheticSpec.seed)

    g = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    g.add_argument("--out", default="results")
    g.add_argument("--seed", type=int, default=0)
    synth_flags(g)

    b = sub.add_parser("baseline", help="all-feature SVM/ANN accuracy")
    common(b)
    b.add_argument("--kfold", type=_positive_int, help="also report k-fold cross-validated accuracy")

    c = sub.add_parser("correlate", aliases=["correlation"], help="correlation ranking and ablation")
    common(c)
    c.add_argument("--ablate", type=_positive_int, default=4)

    m = sub.add_parser("magnitude", help="magnitude-measure ranking and ablation")
    common(m)
    m.add_argument("--ablate", type=_positive_int, default=5)
    m.add_argument("--runs", type=_positive_int)

    a = sub.add_parser("ga", help="genetic-algorithm feature search")
    common(a, model_default="ann")
    a.add_argument("--strategy", choices=list(ga.STRATEGIES), default="tournament")
    a.add_argument("--pop", type=_positive_int)
    a.add_argument("--gen", type=_positive_int)
    a.add_argument("--crossover-rate", type=float, default=0.9)
    a.add_argument("--mutation-rate", type=float)
    a.add_argument("--elitism", type=int, default=1)
    a.add_argument("--tournament-size", type=int)

    r = sub.add_parser("report", help="collect Markdown tables in --out into REPORT.md")
    r.add_argument("--out", default="results")
    return p


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    technique = {"correlation": "correlate"}.get(ns.command, ns.command)
    cfg = ExperimentConfig(technique=technique, out=ns.out, seed=getattr(ns, "seed", 0))
    if technique == "report":
        return cfg
    cfg.synthetic = asdict(SyntheticSpec(
        n_records=ns.n_records, n_informative=ns.informative, n_noise=ns.noise_features,
        class_separation=ns.separation, label_noise_rate=ns.label_noise, seed=ns.data_seed,
    ))
    if technique == "gen-data":
        return cfg
    scale = FULL_SCALE if ns.paper_scale else DESK
    cfg.paper_scale = ns.paper_scale
    cfg.data = None if ns.data in (None, "synthetic") else ns.data
    cfg.model = ns.model
    cfg.standardize = not ns.no_standardize
    cfg.train_fraction = ns.train_fraction
    cfg.validation_fraction = ns.validation_fraction
    cfg.epochs = ns.epochs or scale["epochs"]
    cfg.learning_rate = ns.learning_rate
    cfg.weight_decay = ns.weight_decay
    try:
        cfg.hidden = tuple(int(h) for h in ns.hidden.split(",") if h.strip())
    except ValueError:
        raise UsageError(f"--hidden must be comma-separated integers, got {ns.hidden!r}") from None
    cfg.svm_C = ns.svm_c
    cfg.gamma = ns.gamma
    if technique == "baseline":
        cfg.kfold = ns.kfold
    if technique in ("correlate", "magnitude"):
        cfg.ablate = ns.ablate
    if technique == "magnitude":
        cfg.runs = ns.runs or scale["runs"]
    if technique == "ga":
        cfg.strategy = ns.strategy
        cfg.pop = ns.pop or scale["pop"]
        cfg.gen = ns.gen or scale["gen"]
        cfg.crossover_rate = ns.crossover_rate
        cfg.mutation_rate = ns.mutation_rate
        cfg.elitism = ns.elitism
        cfg.tournament_size = ns.tournament_size
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        threads = threads_from_env()
        paths = run(cfg, threads)
    except UsageError as exc:
        print(f"featsel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, ValueError, RuntimeError, OSError) as exc:
        print(f"featsel: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
