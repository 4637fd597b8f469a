"""Rough-set engine: indiscernibility, approximations, reducts, rule induction.

All operations work on fully symbolic decision tables (numeric attributes
must be discretized first, see :mod:`sonfis.som`). Attribute sets are plain
frozensets of attribute positions within the table schema; only condition
attributes ever appear in them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .tabular import AttributeMeta, DecisionTable

__all__ = [
    "REDUCT_ATTRIBUTE_CAP",
    "Partition",
    "DiscernMatrix",
    "DecisionRule",
    "RuleSet",
    "indiscernibility_partition",
    "lower_approximation",
    "upper_approximation",
    "discernibility_matrix",
    "reducts",
    "induce_rules",
    "classify",
    "classify_many",
    "format_rules",
    "parse_rules",
    "export_rules",
    "load_rules",
    "RuleClassifier",
]

#: Reduct search refuses tables wider than this; the normal-form expansion
#: behind it is exponential in the attribute count.
REDUCT_ATTRIBUTE_CAP = 20


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of object indices covering the whole universe."""

    blocks: tuple[frozenset[int], ...]

    def block_of(self, obj: int) -> frozenset[int]:
        for block in self.blocks:
            if obj in block:
                return block
        raise KeyError(f"object {obj} is not in the partition")


@dataclass(frozen=True)
class DiscernMatrix:
    """Strictly lower-triangular matrix of per-pair discerning attribute sets.

    ``cells`` maps ``(i, j)`` with ``j < i`` to the non-empty set of
    condition-attribute positions on which objects i and j differ; pairs
    with an empty cell are simply absent.
    """

    n_objects: int
    attribute_indices: tuple[int, ...]
    cells: dict

    def cell(self, i: int, j: int) -> frozenset[int]:
        if not (0 <= j < i < self.n_objects):
            raise IndexError(f"cell ({i}, {j}) is not in the lower triangle")
        return self.cells.get((i, j), frozenset())


@dataclass(frozen=True)
class DecisionRule:
    """Conjunctive rule: conditions are (condition position, category) pairs."""

    conditions: tuple[tuple[int, int], ...]
    decision: int
    support: int
    strength: float

    def matches(self, row) -> bool:
        return all(int(row[pos]) == cat for pos, cat in self.conditions)


@dataclass(frozen=True)
class RuleSet:
    """Induced rules plus the code reserved for "no rule fired"."""

    rules: tuple[DecisionRule, ...]
    unknown_code: int
    condition_names: tuple[str, ...]
    decision_name: str


def _require_symbolic(table: DecisionTable, indices) -> None:
    for j in indices:
        if not table.attributes[j].is_symbolic:
            raise ValueError(
                f"attribute {table.attributes[j].name!r} is numeric; "
                "discretize it before rough-set analysis"
            )


def _check_attribute_set(table: DecisionTable, attrs) -> tuple[int, ...]:
    attrs = tuple(int(a) for a in attrs)
    cond = set(table.condition_indices)
    for a in attrs:
        if a not in cond:
            raise ValueError(f"attribute index {a} is not a condition attribute")
    _require_symbolic(table, attrs)
    return attrs


def indiscernibility_partition(table: DecisionTable, attrs) -> Partition:
    """Partition of the objects into equivalence classes of the relation
    "equal on every attribute in ``attrs``". The empty attribute set yields
    the single block of all objects."""
    attrs = _check_attribute_set(table, attrs)
    n = table.n_objects
    if not attrs:
        return Partition((frozenset(range(n)),))
    keys = {}
    for i in range(n):
        key = tuple(int(table.values[i, a]) for a in attrs)
        keys.setdefault(key, []).append(i)
    blocks = sorted(keys.values(), key=lambda b: b[0])
    return Partition(tuple(frozenset(b) for b in blocks))


def _check_object_set(table: DecisionTable, objects) -> frozenset[int]:
    objects = frozenset(int(o) for o in objects)
    if any(o < 0 or o >= table.n_objects for o in objects):
        raise ValueError("object set contains indices outside the universe")
    return objects


def lower_approximation(table: DecisionTable, attrs, objects) -> frozenset[int]:
    """Objects whose whole equivalence class is contained in ``objects``."""
    target = _check_object_set(table, objects)
    partition = indiscernibility_partition(table, attrs)
    result = frozenset()
    for block in partition.blocks:
        if block <= target:
            result |= block
    return result


def upper_approximation(table: DecisionTable, attrs, objects) -> frozenset[int]:
    """Objects whose equivalence class meets ``objects``."""
    target = _check_object_set(table, objects)
    partition = indiscernibility_partition(table, attrs)
    result = frozenset()
    for block in partition.blocks:
        if block & target:
            result |= block
    return result


def discernibility_matrix(table: DecisionTable) -> DiscernMatrix:
    """Per-pair sets of condition attributes that tell two objects apart."""
    cond = table.condition_indices
    _require_symbolic(table, cond)
    values = table.values
    cells = {}
    for i in range(table.n_objects):
        for j in range(i):
            diff = frozenset(a for a in cond if values[i, a] != values[j, a])
            if diff:
                cells[(i, j)] = diff
    return DiscernMatrix(table.n_objects, cond, cells)


def _absorb(sets) -> list[frozenset]:
    """Keep only the inclusion-minimal sets."""
    unique = sorted(set(sets), key=lambda s: (len(s), sorted(s)))
    kept = []
    for s in unique:
        if not any(k <= s for k in kept):
            kept.append(s)
    return kept


def _prime_implicants(clauses) -> list[frozenset]:
    """All prime implicants of a positive CNF given as attribute-set clauses.

    Works by clause-by-clause expansion with absorption, which is exact for
    monotone Boolean functions. An empty clause list denotes the constant
    true function, whose only prime implicant is the empty set.
    """
    minimal = _absorb(clauses)
    terms = {frozenset()}
    for clause in minimal:
        grown = set()
        for term in terms:
            if term & clause:
                grown.add(term)
            else:
                for a in clause:
                    grown.add(term | {a})
        terms = set(_absorb(grown))
    return sorted(terms, key=lambda s: (len(s), sorted(s)))


def reducts(matrix: DiscernMatrix) -> list[frozenset]:
    """All minimal attribute sets preserving every pairwise discernibility.

    These are exactly the prime implicants of the conjunction, over all
    non-empty matrix cells, of the disjunction of that cell's attributes.
    Result sorted by size then lexicographically. Raises if the attribute
    universe exceeds ``REDUCT_ATTRIBUTE_CAP``.
    """
    if len(matrix.attribute_indices) > REDUCT_ATTRIBUTE_CAP:
        raise ValueError(
            f"reduct search over {len(matrix.attribute_indices)} attributes exceeds "
            f"the cap of {REDUCT_ATTRIBUTE_CAP}"
        )
    return _prime_implicants(matrix.cells.values())


def induce_rules(table: DecisionTable, strength_threshold: float = 0.0) -> RuleSet:
    """Elicit minimal certain decision rules from a fully symbolic table.

    For every consistent object the function builds its object-relative
    discernibility clauses against all objects carrying a different
    decision, takes the prime implicants as minimal condition sets, and
    emits one rule per implicant with the object's own values. Identical
    rules are merged; support counts the training objects matching the
    rule's conditions and strength is support divided by the table size.
    Rules below ``strength_threshold`` are dropped. Objects that share
    their condition values with a differently decided object are
    inconsistent and yield no rule.
    """
    if not 0.0 <= strength_threshold <= 1.0:
        raise ValueError("strength_threshold must lie in [0, 1]")
    cond = table.condition_indices
    _require_symbolic(table, cond)
    dec = table.attributes[table.decision_index]
    if not dec.is_symbolic:
        raise ValueError(f"decision attribute {dec.name!r} is numeric")
    if len(cond) > REDUCT_ATTRIBUTE_CAP:
        raise ValueError(
            f"rule induction over {len(cond)} attributes exceeds the cap of "
            f"{REDUCT_ATTRIBUTE_CAP}"
        )

    n = table.n_objects
    rows = table.values[:, list(cond)].astype(int)
    decisions = table.decision.astype(int)

    # Inconsistent objects: same condition values, different decisions.
    seen: dict[tuple, set[int]] = {}
    for i in range(n):
        seen.setdefault(tuple(rows[i]), set()).add(int(decisions[i]))
    consistent = np.array([len(seen[tuple(rows[i])]) == 1 for i in range(n)])

    raw: dict[tuple[tuple[tuple[int, int], ...], int], None] = {}
    n_cond = len(cond)
    for i in range(n):
        if not consistent[i]:
            continue
        clauses = set()
        for j in np.nonzero(decisions != decisions[i])[0]:
            clause = frozenset(int(p) for p in range(n_cond) if rows[i, p] != rows[j, p])
            clauses.add(clause)
        for implicant in _prime_implicants(clauses):
            conditions = tuple(sorted((p, int(rows[i, p])) for p in implicant))
            raw[(conditions, int(decisions[i]))] = None

    rules = []
    for conditions, decision in raw:
        matched = np.ones(n, dtype=bool)
        for pos, cat in conditions:
            matched &= rows[:, pos] == cat
        support = int(matched.sum())
        strength = support / n
        if strength >= strength_threshold:
            rules.append(DecisionRule(conditions, decision, support, strength))

    rules.sort(key=lambda r: (len(r.conditions), r.conditions, r.decision))
    return RuleSet(
        rules=tuple(rules),
        unknown_code=int(dec.categories) + 1,
        condition_names=tuple(table.attributes[j].name for j in cond),
        decision_name=dec.name,
    )


def classify(ruleset: RuleSet, row) -> int:
    """Decision category for one symbolic object.

    ``row`` lists the condition categories in ``condition_names`` order.
    With no matching rule the unknown code is returned; when matched rules
    disagree the smallest decision wins (the conservative merge).
    """
    row = np.asarray(row)
    if row.shape != (len(ruleset.condition_names),):
        raise ValueError(
            f"object must provide {len(ruleset.condition_names)} condition values, "
            f"got shape {row.shape}"
        )
    matched = [rule.decision for rule in ruleset.rules if rule.matches(row)]
    if not matched:
        return ruleset.unknown_code
    return min(matched)


def classify_many(ruleset: RuleSet, rows) -> np.ndarray:
    rows = np.asarray(rows)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    return np.array([classify(ruleset, row) for row in rows], dtype=int)


_RULE_RE = re.compile(
    r"^IF (?P<body>.+) THEN (?P<dname>\w+)=(?P<dec>\d+) "
    r"\[support=(?P<sup>\d+), strength=(?P<str>[0-9.]+)\]$"
)


def format_rules(ruleset: RuleSet) -> str:
    """Render rules in the line grammar
    ``IF a=1 AND b=2 THEN d=3 [support=4, strength=0.0400]``.
    A rule with no conditions renders its antecedent as ``TRUE``."""
    lines = []
    for rule in ruleset.rules:
        if rule.conditions:
            body = " AND ".join(
                f"{ruleset.condition_names[pos]}={cat}" for pos, cat in rule.conditions
            )
        else:
            body = "TRUE"
        lines.append(
            f"IF {body} THEN {ruleset.decision_name}={rule.decision} "
            f"[support={rule.support}, strength={rule.strength:.4f}]"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_rules(text: str, condition_names, unknown_code: int | None = None) -> RuleSet:
    """Inverse of :func:`format_rules`.

    ``unknown_code`` defaults to one above the largest parsed decision.
    """
    condition_names = tuple(condition_names)
    index_of = {name: pos for pos, name in enumerate(condition_names)}
    rules = []
    decision_name = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: not a valid rule: {line!r}")
        conditions = []
        body = m.group("body")
        if body != "TRUE":
            for part in body.split(" AND "):
                name, _, cat = part.partition("=")
                if name not in index_of:
                    raise ValueError(f"line {lineno}: unknown condition attribute {name!r}")
                conditions.append((index_of[name], int(cat)))
        decision_name = m.group("dname")
        rules.append(
            DecisionRule(
                conditions=tuple(sorted(conditions)),
                decision=int(m.group("dec")),
                support=int(m.group("sup")),
                strength=float(m.group("str")),
            )
        )
    if not rules:
        raise ValueError("rule text contains no rules")
    if unknown_code is None:
        unknown_code = max(r.decision for r in rules) + 1
    return RuleSet(tuple(rules), int(unknown_code), condition_names, decision_name)


def export_rules(ruleset: RuleSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_rules(ruleset))


def load_rules(path, condition_names, unknown_code: int | None = None) -> RuleSet:
    with open(path) as fh:
        return parse_rules(fh.read(), condition_names, unknown_code)


class RuleClassifier(BaseEstimator, ClassifierMixin):
    """Certain-rule classifier over symbolic attributes.

    Wraps :func:`induce_rules` / :func:`classify` in the estimator API.
    Predictions are categories 1..k, or k+1 when no induced rule fires.
    """

    def __init__(self, n_categories=5, strength_threshold=0.0):
        self.n_categories = n_categories
        self.strength_threshold = strength_threshold

    def fit(self, X, y, feature_names=None, target_name="d"):
        X = np.asarray(X, dtype=int)
        y = np.asarray(y, dtype=int)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be 2-D with one label per row")
        if feature_names is None:
            feature_names = [f"a{j}" for j in range(X.shape[1])]
        attrs = [
            AttributeMeta(name, "condition", int(X[:, j].max()))
            for j, name in enumerate(feature_names)
        ]
        attrs.append(AttributeMeta(target_name, "decision", int(self.n_categories)))
        table = DecisionTable(attrs, np.column_stack([X, y]).astype(float))
        self.ruleset_ = induce_rules(table, self.strength_threshold)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "ruleset_")
        return classify_many(self.ruleset_, np.asarray(X, dtype=int))
