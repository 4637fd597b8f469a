"""Close-open granularity search: SOM granulation feeding a fuzzy or rough
second stage, scored against held-out data.

Each iteration trains a 2-D map at a drawn neuron count (the closed world of
crisp granules), fits the second stage on those granules, and re-opens the
loop by scoring on the untouched test objects. The search stops early once
the test error falls to the configured level; otherwise the best trial by
test RMSE wins.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rough import RuleSet, classify_many, format_rules, induce_rules, parse_rules
from .som import SelfOrganizingMap, SomDiscretizer
from .tabular import AttributeMeta, DecisionTable, rmse
from .tsk import TskModel, grid_partition_model, init_tsk, subtractive_cluster, train_hybrid
from .tsk import predict as tsk_predict

__all__ = [
    "RandomGrowth",
    "RegularGrowth",
    "SonfisConfig",
    "TrialRecord",
    "SonfisResult",
    "RstPredictor",
    "derive_seed",
    "grid_shape_for",
    "run_sonfis_r",
    "run_sorst",
    "export_trials",
    "save_rst_predictor",
    "load_rst_predictor",
]


def derive_seed(master: int, name: str) -> int:
    """Stable named sub-stream seed so components can be re-seeded independently."""
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class RandomGrowth:
    """Neuron counts drawn uniformly from [min_neurons, max_neurons]."""

    min_neurons: int = 4
    max_neurons: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.min_neurons <= self.max_neurons:
            raise ValueError("need 1 <= min_neurons <= max_neurons")


@dataclass(frozen=True)
class RegularGrowth:
    """Neuron counts start, start+step, start+2*step, ..."""

    start: int = 4
    step: int = 8

    def __post_init__(self):
        if self.start < 1 or self.step < 1:
            raise ValueError("start and step must be at least 1")


@dataclass(frozen=True)
class SonfisConfig:
    """Granularity controls of the search plus second-stage training knobs."""

    neuron_growth: object = field(default_factory=RandomGrowth)
    rule_range: tuple = (5, 8)
    iterations: int = 10
    error_level: float = 0.0
    second_stage: str = "nfis"
    som_epochs: int = 200
    som_sigma0: float | None = None
    tsk_epochs: int = 25
    learning_rate: float = 0.01
    sigma_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.rule_range
        if not 1 <= lo <= hi:
            raise ValueError("need 1 <= min rules <= max rules")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.error_level < 0:
            raise ValueError("error_level must be non-negative")
        if self.second_stage not in ("nfis", "rst"):
            raise ValueError(f"unknown second stage {self.second_stage!r}")


@dataclass
class TrialRecord:
    iteration: int
    neuron_count: int
    grid_shape: tuple
    rule_count: int
    train_rmse: float
    test_rmse: float
    status: str = "ok"
    accuracy: float | None = None
    unknown_count: int | None = None


@dataclass
class SonfisResult:
    trials: list
    best_index: int | None
    best_model: object | None
    best_som: SelfOrganizingMap | None


@dataclass
class RstPredictor:
    """Spatial classifier: per-input ordinal discretizers feeding a rule set.

    ``predict_class`` returns decision categories (unknown code included);
    ``predict_value`` maps categories to the decision discretizer's level
    values, with NaN for unknowns.
    """

    ruleset: RuleSet
    discretizers: tuple
    decision_levels: np.ndarray

    @property
    def condition_names(self):
        return self.ruleset.condition_names

    def discretize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != len(self.discretizers):
            raise ValueError(
                f"expected {len(self.discretizers)} inputs, got {X.shape[1]}"
            )
        return np.column_stack(
            [disc.transform(X[:, j]) for j, disc in enumerate(self.discretizers)]
        )

    def predict_class(self, X) -> np.ndarray:
        return classify_many(self.ruleset, self.discretize(X))

    def predict_value(self, X) -> np.ndarray:
        cats = self.predict_class(X)
        values = np.full(cats.shape, np.nan)
        known = cats != self.ruleset.unknown_code
        values[known] = self.decision_levels[cats[known] - 1]
        return values


def grid_shape_for(neuron_count: int) -> tuple:
    """Most square (rows, cols) factorisation at or just above the count.

    Counts below 4 stay a 1-row line; otherwise the nearest integer >= count
    having a factor pair with rows >= 2 is factorised and the pair with the
    smallest cols - rows gap wins.
    """
    if neuron_count < 1:
        raise ValueError("neuron count must be at least 1")
    if neuron_count < 4:
        return (1, neuron_count)
    m = neuron_count
    while True:
        pairs = [(r, m // r) for r in range(2, math.isqrt(m) + 1) if m % r == 0]
        if pairs:
            return min(pairs, key=lambda rc: rc[1] - rc[0])
        m += 1


def _neuron_counts(growth, iterations: int):
    if isinstance(growth, RandomGrowth):
        rng = np.random.default_rng(growth.seed)
        return [int(c) for c in rng.integers(growth.min_neurons, growth.max_neurons + 1, size=iterations)]
    if isinstance(growth, RegularGrowth):
        return [growth.start + i * growth.step for i in range(iterations)]
    raise TypeError(f"unsupported neuron growth {growth!r}")


def _check_pair(train: DecisionTable, test: DecisionTable) -> None:
    if train.names != test.names:
        raise ValueError("train and test tables must share one schema")
    if test.n_objects < 1:
        raise ValueError("test table is empty")


def _normalize_columns(M: np.ndarray) -> np.ndarray:
    lo = M.min(axis=0)
    span = M.max(axis=0) - lo
    span = np.where(span > 0, span, 1.0)
    return (M - lo) / span


def _fit_nfis(inputs, targets, n_rules, config):
    """Second-stage fuzzy model with a steered rule count.

    The subtractive-clustering radius only controls the center count
    indirectly, so it is bisected until the count lands on target; if 20
    probes fail, a grid partition with the nearest reachable rule count
    steps in and the trial is flagged.
    """
    joint = _normalize_columns(np.column_stack([inputs, targets]))
    lo, hi = 0.05, 1.0
    chosen = None
    for _ in range(20):
        mid = (lo + hi) / 2.0
        centers = subtractive_cluster(joint, radius=mid)
        if len(centers) == n_rules:
            chosen = (centers, mid)
            break
        if len(centers) > n_rules:
            lo = mid
        else:
            hi = mid
    if chosen is not None:
        centers, radius = chosen
        model = init_tsk(centers, inputs, targets, radius=radius, sigma_scale=config.sigma_scale)
        status = "ok"
    else:
        d = inputs.shape[1]
        n_mfs = max(1, min(range(1, n_rules + 1), key=lambda m: abs(m ** d - n_rules)))
        model = grid_partition_model(inputs, targets, n_mfs=n_mfs)
        status = "grid_fallback"
    model, _ = train_hybrid(
        model, inputs, targets, epochs=config.tsk_epochs, learning_rate=config.learning_rate
    )
    return model, model.n_rules, status


def _train_som(train: DecisionTable, neurons: int, config: SonfisConfig, iteration: int):
    rows, cols = grid_shape_for(neurons)
    som = SelfOrganizingMap(
        shape=(rows, cols),
        epochs=config.som_epochs,
        sigma0=config.som_sigma0,
        seed=derive_seed(config.seed, f"som:{iteration}"),
    ).fit(train.values)
    return som, (rows, cols)


def run_sonfis_r(train: DecisionTable, test: DecisionTable, config: SonfisConfig) -> SonfisResult:
    """Neuro-fuzzy close-open search over neuron counts and rule counts.

    Per iteration: draw a neuron count, granulate the training table with a
    2-D map, and for every rule count in range fit a fuzzy model on the
    granules and score it on the held-out test objects. Trials whose granule
    count cannot support the rule count are skipped with a diagnostic.
    Returns every trial plus the best model (minimum test RMSE, earliest on
    ties).
    """
    _check_pair(train, test)
    cond = list(train.condition_indices)
    dec = train.decision_index
    counts = _neuron_counts(config.neuron_growth, config.iterations)

    trials = []
    best_index = None
    best_model = None
    best_som = None
    best_rmse = np.inf
    stop = False

    for iteration, requested in enumerate(counts, start=1):
        som, shape = _train_som(train, requested, config, iteration)
        granules = som.granules(train.values)
        g_inputs, g_targets = granules[:, cond], granules[:, dec]
        for n_rules in range(config.rule_range[0], config.rule_range[1] + 1):
            if len(granules) < n_rules:
                trials.append(
                    TrialRecord(
                        iteration, shape[0] * shape[1], shape, n_rules,
                        float("nan"), float("nan"),
                        status=f"skipped: {len(granules)} granules < {n_rules} rules",
                    )
                )
                continue
            model, actual_rules, status = _fit_nfis(g_inputs, g_targets, n_rules, config)
            train_rmse = rmse(tsk_predict(model, g_inputs), g_targets)
            test_rmse = rmse(tsk_predict(model, test.conditions), test.decision)
            trials.append(
                TrialRecord(
                    iteration, shape[0] * shape[1], shape, actual_rules,
                    train_rmse, test_rmse, status=status,
                )
            )
            if np.isfinite(test_rmse) and test_rmse < best_rmse:
                best_rmse = test_rmse
                best_index = len(trials) - 1
                best_model = model
                best_som = som
            if np.isfinite(test_rmse) and test_rmse <= config.error_level:
                stop = True
                break
        if stop:
            break
    return SonfisResult(trials, best_index, best_model, best_som)


def run_sorst(
    train: DecisionTable,
    test: DecisionTable,
    config: SonfisConfig,
    k: int = 5,
    strength_threshold: float = 0.0,
) -> SonfisResult:
    """Rough-set close-open search: granules are discretized to k categories
    per attribute by 1-D maps, rules are induced on the symbolic granules,
    and test objects are classified through the same discretizers.

    Accuracy counts exact category hits (unknowns never hit); RMSE compares
    the level values of predicted categories against the raw test decision,
    with unknown classifications counted separately and left out.
    """
    _check_pair(train, test)
    if k < 2:
        raise ValueError("k must be at least 2")
    cond = list(train.condition_indices)
    dec = train.decision_index
    counts = _neuron_counts(config.neuron_growth, config.iterations)

    trials = []
    best_index = None
    best_model = None
    best_som = None
    best_rmse = np.inf

    for iteration, requested in enumerate(counts, start=1):
        som, shape = _train_som(train, requested, config, iteration)
        granules = som.granules(train.values)
        discretizers = []
        for j in range(granules.shape[1]):
            disc = SomDiscretizer(
                n_categories=k,
                epochs=config.som_epochs,
                seed=derive_seed(config.seed, f"disc:{iteration}:{j}"),
            ).fit(granules[:, j])
            discretizers.append(disc)
        symbolic = np.column_stack(
            [discretizers[j].transform(granules[:, j]) for j in range(granules.shape[1])]
        )
        attrs = [
            AttributeMeta(train.attributes[j].name, train.attributes[j].kind, k)
            for j in range(len(train.attributes))
        ]
        sym_table = DecisionTable(attrs, symbolic.astype(float))
        ruleset = induce_rules(sym_table, strength_threshold)
        predictor = RstPredictor(
            ruleset=ruleset,
            discretizers=tuple(discretizers[j] for j in cond),
            decision_levels=discretizers[dec].levels_,
        )

        train_pred = predictor.predict_value(granules[:, cond])
        train_known = ~np.isnan(train_pred)
        train_rmse = (
            rmse(train_pred[train_known], granules[train_known, dec])
            if train_known.any()
            else float("nan")
        )
        test_cats = predictor.predict_class(test.conditions)
        actual_cats = discretizers[dec].transform(test.decision)
        accuracy = float(np.mean(test_cats == actual_cats))
        unknown = int(np.sum(test_cats == ruleset.unknown_code))
        known = test_cats != ruleset.unknown_code
        test_rmse = (
            rmse(predictor.decision_levels[test_cats[known] - 1], test.decision[known])
            if known.any()
            else float("nan")
        )
        trials.append(
            TrialRecord(
                iteration, shape[0] * shape[1], shape, len(ruleset.rules),
                train_rmse, test_rmse,
                status="ok" if known.any() else "all_unknown",
                accuracy=accuracy, unknown_count=unknown,
            )
        )
        if np.isfinite(test_rmse) and test_rmse < best_rmse:
            best_rmse = test_rmse
            best_index = len(trials) - 1
            best_model = predictor
            best_som = som
        if np.isfinite(test_rmse) and test_rmse <= config.error_level:
            break
    return SonfisResult(trials, best_index, best_model, best_som)


def export_trials(trials, path) -> None:
    """Trial log CSV; classification trials gain accuracy/unknown columns."""
    with_accuracy = any(t.accuracy is not None for t in trials)
    header = ["iteration", "neurons", "rows", "cols", "rules", "train_rmse", "test_rmse", "status"]
    if with_accuracy:
        header += ["accuracy", "unknowns"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in trials:
            row = [
                t.iteration,
                t.neuron_count,
                t.grid_shape[0],
                t.grid_shape[1],
                t.rule_count,
                "" if not np.isfinite(t.train_rmse) else f"{t.train_rmse:.6f}",
                "" if not np.isfinite(t.test_rmse) else f"{t.test_rmse:.6f}",
                t.status,
            ]
            if with_accuracy:
                row += [
                    "" if t.accuracy is None else f"{t.accuracy:.6f}",
                    "" if t.unknown_count is None else t.unknown_count,
                ]
            writer.writerow(row)


def save_rst_predictor(predictor: RstPredictor, path) -> None:
    """Serialise a rule-based spatial predictor as a JSON envelope."""
    payload = {
        "kind": "rules",
        "unknown_code": predictor.ruleset.unknown_code,
        "condition_names": list(predictor.ruleset.condition_names),
        "decision_name": predictor.ruleset.decision_name,
        "rules": format_rules(predictor.ruleset).splitlines(),
        "decision_levels": [float(v) for v in predictor.decision_levels],
        "discretizers": [disc.to_dict() for disc in predictor.discretizers],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_rst_predictor(path) -> RstPredictor:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("kind") != "rules":
        raise ValueError(f"{path}: not a rule predictor file")
    ruleset = parse_rules(
        "\n".join(payload["rules"]),
        payload["condition_names"],
        unknown_code=payload["unknown_code"],
    )
    ruleset = RuleSet(
        ruleset.rules, ruleset.unknown_code, ruleset.condition_names, payload["decision_name"]
    )
    return RstPredictor(
        ruleset=ruleset,
        discretizers=tuple(SomDiscretizer.from_dict(d) for d in payload["discretizers"]),
        decision_levels=np.asarray(payload["decision_levels"], dtype=float),
    )
