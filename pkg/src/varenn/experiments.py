"""Experiment orchestration: the 92-combination suites, knockouts, reports.

An experiment is one (target, input variables, knockout, training length)
configuration. Suites enumerate all C(8,1) + C(8,2) + C(8,3) = 92 input
combinations in canonical order (single variables first, then pairs, then
triples, each block lexicographic by variable order), run them through the
dataset/train/evaluate pipeline, and attach the group statistics.
"""

from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cube import ClimateCube, VariableId, VARIABLE_CODES, variable
from .dataset import DatasetManifest, Split, build_dataset, save_manifest, split_tensors
from .encode import Knockout
from .errors import ValidationError, VarennError
from .lenet import (LeNetConfig, LeNetParams, TrainConfig, predict,
                    save_checkpoint, train, write_training_log)
from .stats import (ConfusionMatrix, OlsFit, StatTestResult,
                    UndefinedKappaError, accuracy, experiment_similarity,
                    kruskal_wallis, mann_whitney_u, ols_regression,
                    similarity_matrix, weighted_kappa)

_LABEL_SHUFFLE_STREAM = 401

TARGET_CODES = {"TMP": "tmp", "PRE": "pre"}


@dataclass(frozen=True)
class ExperimentSpec:
    """One row of a combinatorial suite, or an ablation variant of one."""

    id: int
    target: str
    inputs: tuple[str, ...]
    knockout: Knockout = Knockout.NONE
    training_years: int = 30
    labeling_years: int = 10
    c_t: float = 0.98
    seed: int = 0
    train: TrainConfig | None = None

    def validate(self) -> None:
        if self.target not in TARGET_CODES:
            raise ValidationError(f"unknown target {self.target!r}; expected 'TMP' or 'PRE'")
        if not 1 <= len(self.inputs) <= 3:
            raise ValidationError(f"experiment needs 1..3 input variables, got {len(self.inputs)}")
        order = [variable(code).canonical_index for code in self.inputs]
        if sorted(set(order)) != order:
            raise ValidationError(f"inputs must be unique and sorted canonically, got {self.inputs}")
        if self.training_years < 1 or self.labeling_years < 1:
            raise ValidationError("training_years and labeling_years must be >= 1")

    @property
    def target_code(self) -> str:
        return TARGET_CODES[self.target]

    @property
    def input_variables(self) -> tuple[VariableId, ...]:
        return tuple(variable(code) for code in self.inputs)

    @property
    def n_vars(self) -> int:
        return len(self.inputs)


def enumerate_combinations(target: str, c_t: float = 0.98, seed: int = 0,
                           train_cfg: TrainConfig | None = None) -> list[ExperimentSpec]:
    """All 92 input combinations for one target, ids 1..92 in canonical order."""
    if target not in TARGET_CODES:
        raise ValidationError(f"unknown target {target!r}")
    specs = []
    next_id = 1
    for size in (1, 2, 3):
        for combo in itertools.combinations(VARIABLE_CODES, size):
            specs.append(ExperimentSpec(id=next_id, target=target, inputs=combo,
                                        c_t=c_t, seed=seed, train=train_cfg))
            next_id += 1
    return specs


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    confusion: ConfusionMatrix
    accuracy: float
    kappa: float
    n_train: int
    n_test: int
    params: LeNetParams | None = None
    log: list = field(default_factory=list)
    manifest: DatasetManifest | None = None


def run_experiment(cube: ClimateCube, spec: ExperimentSpec,
                   net_cfg: LeNetConfig | None = None,
                   train_cfg: TrainConfig | None = None,
                   scaling: str = "global",
                   shuffle_labels_seed: int | None = None,
                   keep_params: bool = True) -> ExperimentResult:
    """Full pipeline for one experiment: dataset, training, test-split evaluation.

    ``shuffle_labels_seed`` permutes all labels before training (a chance-level
    control); the evaluation then scores against the permuted labels. Kappa is
    NaN when its expected-agreement denominator is degenerate on a tiny test
    split.
    """
    cfg = train_cfg or spec.train or TrainConfig()
    manifest = build_dataset(cube, spec, scaling=scaling)
    tensors = split_tensors(manifest, quantize_inputs=cfg.quantize_inputs)
    labels = {split: pair[1] for split, pair in tensors.items()}
    if shuffle_labels_seed is not None:
        pooled = np.concatenate([labels[s] for s in Split])
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([shuffle_labels_seed, _LABEL_SHUFFLE_STREAM])))
        pooled = pooled[rng.permutation(len(pooled))]
        offset = 0
        for s in Split:
            labels[s] = pooled[offset:offset + len(labels[s])]
            offset += len(labels[s])

    train_x, _ = tensors[Split.TRAIN]
    val_x, _ = tensors[Split.VALIDATION]
    test_x, _ = tensors[Split.TEST]
    params, log = train(train_x, labels[Split.TRAIN], val_x, labels[Split.VALIDATION],
                        cfg, net_cfg=net_cfg)
    predicted, _ = predict(params, test_x)
    cm = ConfusionMatrix.from_predictions(labels[Split.TEST], predicted)
    acc = accuracy(cm)
    try:
        kappa = weighted_kappa(cm)
    except UndefinedKappaError:
        kappa = float("nan")
    return ExperimentResult(spec=spec, confusion=cm, accuracy=acc, kappa=kappa,
                            n_train=len(train_x), n_test=len(test_x),
                            params=params if keep_params else None,
                            log=log, manifest=manifest)


@dataclass(frozen=True)
class SuiteRow:
    id: int
    inputs: tuple[str, ...]
    accuracy: float
    kappa: float
    similarity: float
    n_train: int
    n_test: int


@dataclass
class SuiteReport:
    target: str
    c_t: float
    seed: int
    rows: list[SuiteRow]
    failures: list[tuple[int, str, str]]
    kruskal: StatTestResult | None
    pairwise: dict[tuple[int, int], StatTestResult]
    regressions: dict[int, OlsFit | None]

    def row_for(self, experiment_id: int) -> SuiteRow:
        for row in self.rows:
            if row.id == experiment_id:
                return row
        raise ValidationError(f"no row for experiment {experiment_id}")


def _suite_worker(args) -> tuple[int, SuiteRow | None, tuple[str, str] | None]:
    cube, spec, net_cfg, train_cfg, scaling, sim, out_dir = args
    try:
        result = run_experiment(cube, spec, net_cfg=net_cfg, train_cfg=train_cfg,
                                scaling=scaling, keep_params=out_dir is not None)
    except VarennError as exc:
        return spec.id, None, (type(exc).__name__, str(exc))
    similarity = experiment_similarity(spec.target_code, spec.inputs, sim)
    if out_dir is not None:
        stem = os.path.join(out_dir, f"exp_{spec.id:03d}")
        save_manifest(result.manifest, stem + ".manifest.tsv")
        save_checkpoint(result.params, stem + ".vnet")
        write_training_log(result.log, stem + ".log.tsv")
    row = SuiteRow(spec.id, spec.inputs, result.accuracy, result.kappa, similarity,
                   result.n_train, result.n_test)
    return spec.id, row, None


def run_suite(cube: ClimateCube, target: str, c_t: float = 0.98, seed: int = 0,
              specs: list[ExperimentSpec] | None = None,
              train_cfg: TrainConfig | None = None,
              net_cfg: LeNetConfig | None = None,
              scaling: str = "global",
              workers: int = 1,
              out_dir: str | None = None) -> SuiteReport:
    """Run a suite (all 92 combinations by default, or an explicit subset).

    Individual experiment failures are recorded and do not abort the suite.
    Results are reduced in experiment-id order, so worker count does not
    change any output.
    """
    if specs is None:
        specs = enumerate_combinations(target, c_t=c_t, seed=seed, train_cfg=train_cfg)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    sim = similarity_matrix(cube)
    jobs = [(cube, spec, net_cfg, train_cfg, scaling, sim, out_dir) for spec in specs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_suite_worker, jobs))
    else:
        outcomes = [_suite_worker(job) for job in jobs]
    outcomes.sort(key=lambda item: item[0])

    rows = [row for _, row, err in outcomes if row is not None]
    failures = [(exp_id, err[0], err[1]) for exp_id, row, err in outcomes if err is not None]

    by_k: dict[int, list[float]] = {}
    for row in rows:
        by_k.setdefault(len(row.inputs), []).append(row.accuracy)
    present = sorted(k for k, accs in by_k.items() if accs)
    kw = kruskal_wallis([by_k[k] for k in present]) if len(present) >= 2 else None
    pairs = list(itertools.combinations(present, 2))
    pairwise = {pair: mann_whitney_u(by_k[pair[0]], by_k[pair[1]],
                                     alpha_adjust=max(1, len(pairs)))
                for pair in pairs}
    regressions: dict[int, OlsFit | None] = {}
    for k in present:
        sims = [row.similarity for row in rows if len(row.inputs) == k]
        accs = [row.accuracy for row in rows if len(row.inputs) == k]
        if len(accs) >= 3 and len(set(sims)) > 1:
            regressions[k] = ols_regression(sims, accs)
        else:
            regressions[k] = None
    return SuiteReport(target=target, c_t=c_t, seed=seed, rows=rows, failures=failures,
                       kruskal=kw, pairwise=pairwise, regressions=regressions)


def _fmt(value: float, digits: int = 4) -> str:
    return "nan" if value != value else f"{value:.{digits}f}"


def write_suite_report(suite: SuiteReport, path) -> None:
    """Human-readable summary plus machine-readable TSV rows, one file."""
    lines = [f"varenn suite report: target={suite.target} c_t={suite.c_t!r} seed={suite.seed}",
             ""]
    header = ["id"] + list(VARIABLE_CODES) + ["accuracy", "kappa", "similarity"]
    lines.append("  ".join(f"{h:>10}" if h not in VARIABLE_CODES else f"{h:>4}" for h in header))
    for row in suite.rows:
        marks = [code if code in row.inputs else "-" for code in VARIABLE_CODES]
        lines.append("  ".join([f"{row.id:>10}"] + [f"{m:>4}" for m in marks]
                               + [f"{_fmt(row.accuracy):>10}", f"{_fmt(row.kappa):>10}",
                                  f"{_fmt(row.similarity):>10}"]))
    lines.append("")
    if suite.failures:
        lines.append("failures:")
        for exp_id, kind, message in suite.failures:
            lines.append(f"  #{exp_id} {kind}: {message}")
        lines.append("")
    if suite.kruskal is not None:
        lines.append(f"kruskal_wallis over k-variable groups: H={_fmt(suite.kruskal.statistic)} "
                     f"p={_fmt(suite.kruskal.p_value, 6)}")
    for (k1, k2), res in sorted(suite.pairwise.items()):
        lines.append(f"mann_whitney_u {k1}-VAR vs {k2}-VAR: U={_fmt(res.statistic, 1)} "
                     f"p_bonferroni={_fmt(res.p_value, 6)}")
    for k, fit in sorted(suite.regressions.items()):
        if fit is None:
            lines.append(f"regression accuracy~similarity {k}-VAR: not estimable")
        else:
            lines.append(f"regression accuracy~similarity {k}-VAR: slope={_fmt(fit.slope, 6)} "
                         f"intercept={_fmt(fit.intercept, 6)} p={_fmt(fit.p_value, 6)}")
    lines.append("")
    lines.append("# rows\tid\tinputs\taccuracy\tkappa\tsimilarity\tn_train\tn_test")
    for row in suite.rows:
        lines.append(f"row\t{row.id}\t{','.join(row.inputs)}\t{_fmt(row.accuracy, 6)}\t"
                     f"{_fmt(row.kappa, 6)}\t{_fmt(row.similarity, 6)}\t{row.n_train}\t{row.n_test}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def suite_to_json(suite: SuiteReport) -> str:
    def test_dict(res: StatTestResult | None):
        if res is None:
            return None
        return {"statistic": res.statistic, "p_value": res.p_value,
                "method": res.method, "adjustment": res.adjustment}

    payload = {
        "target": suite.target,
        "c_t": suite.c_t,
        "seed": suite.seed,
        "rows": [{"id": r.id, "inputs": list(r.inputs), "accuracy": r.accuracy,
                  "kappa": None if r.kappa != r.kappa else r.kappa,
                  "similarity": r.similarity, "n_train": r.n_train, "n_test": r.n_test}
                 for r in suite.rows],
        "failures": [{"id": i, "error": kind, "message": msg} for i, kind, msg in suite.failures],
        "kruskal_wallis": test_dict(suite.kruskal),
        "pairwise_mwu": {f"{k1}v{k2}": test_dict(res) for (k1, k2), res in sorted(suite.pairwise.items())},
        "regressions": {str(k): (None if fit is None else
                                 {"slope": fit.slope, "intercept": fit.intercept, "p_value": fit.p_value})
                        for k, fit in sorted(suite.regressions.items())},
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def save_suite_json(suite: SuiteReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(suite_to_json(suite) + "\n")


def suite_from_json(text: str) -> SuiteReport:
    payload = json.loads(text)

    def test_from(d, method):
        if d is None:
            return None
        return StatTestResult(d["statistic"], d["p_value"], method, d.get("adjustment", "none"))

    rows = [SuiteRow(r["id"], tuple(r["inputs"]), r["accuracy"],
                     float("nan") if r["kappa"] is None else r["kappa"],
                     r["similarity"], r["n_train"], r["n_test"])
            for r in payload["rows"]]
    failures = [(f["id"], f["error"], f["message"]) for f in payload["failures"]]
    pairwise = {}
    for key, d in payload["pairwise_mwu"].items():
        k1, k2 = key.split("v")
        pairwise[(int(k1), int(k2))] = StatTestResult(d["statistic"], d["p_value"],
                                                      d["method"], d["adjustment"])
    regressions = {int(k): (None if d is None else OlsFit(d["slope"], d["intercept"], d["p_value"]))
                   for k, d in payload["regressions"].items()}
    return SuiteReport(target=payload["target"], c_t=payload["c_t"], seed=payload["seed"],
                       rows=rows, failures=failures,
                       kruskal=test_from(payload["kruskal_wallis"], "kruskal_wallis"),
                       pairwise=pairwise, regressions=regressions)


# ---------------------------------------------------------------------------
# Knockout and shortened-training ablations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationRow:
    label: str
    knockout: Knockout
    training_years: int
    accuracy: float
    kappa: float


@dataclass
class AblationReport:
    base: ExperimentSpec
    rows: list[AblationRow]


ABLATION_VARIANTS: tuple[tuple[str, Knockout, int], ...] = (
    # (content label, which variation is knocked out, training years)
    ("default", Knockout.NONE, 30),
    ("seasonal_variations_only", Knockout.INTERANNUAL, 30),
    ("interannual_variations_only", Knockout.SEASONAL, 30),
    ("10_year_training", Knockout.NONE, 10),
)


def run_ablations(cube: ClimateCube, best_spec: ExperimentSpec,
                  net_cfg: LeNetConfig | None = None,
                  train_cfg: TrainConfig | None = None,
                  scaling: str = "global") -> AblationReport:
    """Four-variant comparison: full encoding, the two knockouts, short training.

    Row labels name the variation that REMAINS in the images; e.g. the
    seasonal_variations_only row trains on horizontal-striped images whose
    interannual variation was averaged out.
    """
    best_spec.validate()
    rows = []
    for label, knockout, years in ABLATION_VARIANTS:
        spec = replace(best_spec, knockout=knockout, training_years=years)
        result = run_experiment(cube, spec, net_cfg=net_cfg, train_cfg=train_cfg,
                                scaling=scaling, keep_params=False)
        rows.append(AblationRow(label, knockout, years, result.accuracy, result.kappa))
    return AblationReport(base=best_spec, rows=rows)


def write_ablation_report(report: AblationReport, path) -> None:
    spec = report.base
    with open(path, "w") as fh:
        fh.write(f"varenn ablation report: target={spec.target} inputs={','.join(spec.inputs)} "
                 f"c_t={spec.c_t!r} seed={spec.seed}\n\n")
        fh.write(f"{'experiment':<30}{'knockout':<20}{'train_years':>12}"
                 f"{'accuracy':>10}{'kappa':>10}\n")
        for row in report.rows:
            fh.write(f"{row.label:<30}{row.knockout.value:<20}{row.training_years:>12}"
                     f"{_fmt(row.accuracy):>10}{_fmt(row.kappa):>10}\n")
