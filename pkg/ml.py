# ml.py - decision tree and random forest classifiers written from scratch
"""
CART-style trees (Gini or entropy), bagged forests with per-node feature
sampling, impurity-based feature importances and JSON persistence.

Thresholds are midpoints between consecutive distinct values; samples go
left when x[feature] <= threshold. Ties between candidate splits resolve to
the lowest feature index, then the lowest threshold.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator

from errors import (
    ArityMismatch,
    DegenerateSplit,
    EmptyNode,
    EmptyTrainingSet,
    InputError,
    PartitionMismatch,
    UntrainedModel,
)

logger = logging.getLogger("pmi-dt.ml")

FORMAT_VERSION = 1
TIE_TOLERANCE = 1e-12

FeatureSampler = Callable[[int], np.ndarray]


class SplitCriterion(str, Enum):
    GINI = "gini"
    ENTROPY = "entropy"


class TrainConfig(BaseModel):
    criterion: SplitCriterion = SplitCriterion.GINI
    max_depth: int = 10
    min_samples_split: int = 2
    n_trees: int = 100
    max_features: Union[int, Literal["sqrt"]] = "sqrt"
    seed: int = 42
    test_fraction: float = 0.3
    n_jobs: int = 1

    @field_validator("test_fraction")
    @classmethod
    def _fraction(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("test_fraction must lie strictly between 0 and 1")
        return v

    @field_validator("max_depth", "n_trees", "n_jobs")
    @classmethod
    def _at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @field_validator("min_samples_split")
    @classmethod
    def _min_split(cls, v: int) -> int:
        if v < 2:
            raise ValueError("min_samples_split must be at least 2")
        return v

    @field_validator("seed")
    @classmethod
    def _seed_non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("seed must be non-negative")
        return v


# ── impurity ────────────────────────────────────────────────────────────
def _count_vector(counts: Union[Mapping[Any, int], Sequence[int], np.ndarray]) -> np.ndarray:
    values = list(counts.values()) if isinstance(counts, Mapping) else list(counts)
    c = np.asarray(values, dtype=np.float64)
    if c.size == 0 or np.any(c < 0) or c.sum() <= 0:
        raise EmptyNode("Class counts must be non-negative with a positive total")
    return c


def gini(class_counts) -> float:
    c = _count_vector(class_counts)
    p = c / c.sum()
    return float(1.0 - np.sum(p * p))


def entropy(class_counts) -> float:
    c = _count_vector(class_counts)
    p = c / c.sum()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


IMPURITY = {SplitCriterion.GINI: gini, SplitCriterion.ENTROPY: entropy}


def _aligned(parent, children) -> Tuple[np.ndarray, List[np.ndarray]]:
    if isinstance(parent, Mapping):
        labels = list(parent)
        for child in children:
            labels += [k for k in child if k not in labels]
        p = np.array([parent.get(k, 0) for k in labels], dtype=np.float64)
        kids = [np.array([child.get(k, 0) for k in labels], dtype=np.float64) for child in children]
        return p, kids
    p = np.asarray(list(parent), dtype=np.float64)
    kids = [np.asarray(list(child), dtype=np.float64) for child in children]
    if any(k.shape != p.shape for k in kids):
        raise PartitionMismatch("Child count vectors must have the parent's length")
    return p, kids


def information_gain(parent_counts, children_counts, criterion: SplitCriterion = SplitCriterion.ENTROPY) -> float:
    """Parent impurity minus the size-weighted impurity of the children."""
    parent, children = _aligned(parent_counts, list(children_counts))
    if not children or not np.array_equal(np.sum(children, axis=0), parent):
        raise PartitionMismatch("Children counts do not sum to the parent counts")
    impurity = IMPURITY[SplitCriterion(criterion)]
    total = parent.sum()
    weighted = sum((child.sum() / total) * impurity(child) for child in children if child.sum() > 0)
    return impurity(parent) - weighted


def _impurity_rows(counts: np.ndarray, criterion: SplitCriterion) -> np.ndarray:
    """Row-wise impurity of an (m, C) array of counts with positive row sums."""
    totals = counts.sum(axis=1, keepdims=True)
    p = counts / totals
    if criterion is SplitCriterion.GINI:
        return 1.0 - np.sum(p * p, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -np.sum(terms, axis=1)


# ── tree structure ──────────────────────────────────────────────────────
class Leaf(BaseModel):
    kind: Literal["leaf"] = "leaf"
    class_label: int
    class_counts: List[int]


class Internal(BaseModel):
    kind: Literal["internal"] = "internal"
    feature_index: int
    threshold: float
    n_samples: int
    impurity_decrease: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Annotated[Union[Leaf, Internal], Field(discriminator="kind")]
Internal.model_rebuild()


class Tree(BaseModel):
    kind: Literal["tree"] = "tree"
    root: TreeNode
    n_features: int
    n_classes: int
    criterion: SplitCriterion = SplitCriterion.GINI


class Forest(BaseModel):
    kind: Literal["forest"] = "forest"
    trees: List[Tree]
    per_tree_seeds: List[int]
    max_features: int
    n_features: int
    n_classes: int

    @property
    def n(self) -> int:
        return len(self.trees)


Model = Union[Tree, Forest]


def tree_depth(node) -> int:
    if isinstance(node, Tree):
        node = node.root
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def iter_internal(node):
    if isinstance(node, Tree):
        node = node.root
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Internal):
            yield n
            stack.extend((n.right, n.left))


# ── split search ────────────────────────────────────────────────────────
def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, criterion: SplitCriterion,
               features: Sequence[int]) -> Optional[Tuple[int, float, float]]:
    """(feature, threshold, impurity decrease) of the best split, or None."""
    n = len(y)
    parent_counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    parent_imp = _impurity_rows(parent_counts[None, :], criterion)[0]
    onehot = np.eye(n_classes)[y]
    best: Optional[Tuple[int, float, float]] = None

    for f in sorted(int(i) for i in features):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        boundaries = np.flatnonzero(xs[:-1] < xs[1:])
        if boundaries.size == 0:
            continue
        left = np.cumsum(onehot[order], axis=0)[boundaries]
        right = parent_counts - left
        n_left = boundaries + 1.0
        decrease = parent_imp - (n_left / n) * _impurity_rows(left, criterion) \
            - ((n - n_left) / n) * _impurity_rows(right, criterion)
        for k, b in enumerate(boundaries):
            if best is None or decrease[k] > best[2] + TIE_TOLERANCE:
                lo, hi = xs[b], xs[b + 1]
                threshold = lo + (hi - lo) / 2.0
                if not threshold < hi:
                    threshold = lo
                best = (f, float(threshold), float(decrease[k]))
    return best


def _leaf(y: np.ndarray, n_classes: int) -> Leaf:
    counts = np.bincount(y, minlength=n_classes)
    return Leaf(class_label=int(np.argmax(counts)), class_counts=[int(c) for c in counts])


def _grow(X, y, depth, config: TrainConfig, n_classes, sampler: Optional[FeatureSampler]):
    n = len(y)
    if depth >= config.max_depth or n < config.min_samples_split or np.all(y == y[0]):
        return _leaf(y, n_classes)
    d = X.shape[1]
    features = sampler(d) if sampler is not None else np.arange(d)
    split = best_split(X, y, n_classes, config.criterion, features)
    if split is None or split[2] <= TIE_TOLERANCE:
        return _leaf(y, n_classes)
    f, threshold, decrease = split
    go_left = X[:, f] <= threshold
    return Internal(
        feature_index=f,
        threshold=threshold,
        n_samples=n,
        impurity_decrease=decrease,
        left=_grow(X[go_left], y[go_left], depth + 1, config, n_classes, sampler),
        right=_grow(X[~go_left], y[~go_left], depth + 1, config, n_classes, sampler),
    )


def grow_tree(X, y, config: TrainConfig, feature_sampler: Optional[FeatureSampler] = None,
              n_classes: Optional[int] = None) -> Tree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyTrainingSet("Cannot grow a tree from zero samples")
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ArityMismatch("X must be (n_samples, n_features) matching y")
    if n_classes is None:
        n_classes = max(2, int(y.max()) + 1)
    root = _grow(X, y, 0, config, n_classes, feature_sampler)
    return Tree(root=root, n_features=X.shape[1], n_classes=n_classes, criterion=config.criterion)


# ── prediction ──────────────────────────────────────────────────────────
def _route(node, x: np.ndarray) -> Leaf:
    while isinstance(node, Internal):
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node


def _check_arity(model: Optional[Model], x: np.ndarray):
    if model is None:
        raise UntrainedModel("No model has been trained or loaded")
    if x.shape[-1] != model.n_features:
        raise ArityMismatch(f"Expected {model.n_features} features, got {x.shape[-1]}")


def predict_tree(tree: Tree, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    _check_arity(tree, x)
    return _route(tree.root, x).class_label


def _tree_proba(tree: Tree, x: np.ndarray) -> np.ndarray:
    counts = np.asarray(_route(tree.root, x).class_counts, dtype=np.float64)
    return counts / counts.sum()


def predict_forest(forest: Forest, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    _check_arity(forest, x)
    votes = np.bincount([_route(t.root, x).class_label for t in forest.trees], minlength=forest.n_classes)
    return int(np.argmax(votes))


def predict_proba(model: Model, X) -> np.ndarray:
    """Leaf class fractions for a tree, vote fractions for a forest; shape (n, n_classes)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_arity(model, X)
    if isinstance(model, Tree):
        return np.array([_tree_proba(model, x) for x in X])
    out = np.zeros((len(X), model.n_classes))
    for i, x in enumerate(X):
        votes = np.bincount([_route(t.root, x).class_label for t in model.trees], minlength=model.n_classes)
        out[i] = votes / model.n
    return out


def predict(model: Model, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_arity(model, X)
    if isinstance(model, Tree):
        return np.array([_route(model.root, x).class_label for x in X], dtype=np.int64)
    return np.array([predict_forest(model, x) for x in X], dtype=np.int64)


# ── forest ──────────────────────────────────────────────────────────────
def resolve_max_features(max_features: Union[int, str], n_features: int) -> int:
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    return max(1, min(int(max_features), n_features))


def per_tree_seeds(seed: int, n_trees: int) -> List[int]:
    """Independent seeds keyed on (seed, tree index); scheduling cannot change them."""
    return [int(np.random.SeedSequence([seed, i]).generate_state(1, dtype=np.uint64)[0]) for i in range(n_trees)]


def train_forest(X, y, config: TrainConfig) -> Forest:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyTrainingSet("Cannot train a forest on zero samples")
    n, d = X.shape
    n_classes = max(2, int(y.max()) + 1)
    k = resolve_max_features(config.max_features, d)
    seeds = per_tree_seeds(config.seed, config.n_trees)

    def grow_one(tree_seed: int) -> Tree:
        rng = np.random.default_rng(tree_seed)
        sample = rng.integers(0, n, size=n)

        def sampler(n_features: int) -> np.ndarray:
            return np.sort(rng.choice(n_features, size=k, replace=False))

        return grow_tree(X[sample], y[sample], config, feature_sampler=sampler, n_classes=n_classes)

    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
            trees = list(pool.map(grow_one, seeds))
    else:
        trees = [grow_one(s) for s in seeds]
    logger.info(f"✅ Trained forest of {len(trees)} trees on {n} samples ({k} of {d} features per split)")
    return Forest(trees=trees, per_tree_seeds=seeds, max_features=k, n_features=d, n_classes=n_classes)


# ── importances ─────────────────────────────────────────────────────────
def _tree_importances(tree: Tree) -> np.ndarray:
    acc = np.zeros(tree.n_features)
    root = tree.root
    if isinstance(root, Leaf):
        return acc
    total = root.n_samples
    for node in iter_internal(root):
        acc[node.feature_index] += (node.n_samples / total) * node.impurity_decrease
    s = acc.sum()
    return acc / s if s > 0 else acc


def feature_importances(model: Optional[Model], feature_names: Optional[Sequence[str]] = None) -> Dict[str, float]:
    """Mean normalized impurity decrease per feature; all zeros if the model never splits."""
    if model is None:
        raise UntrainedModel("No model has been trained or loaded")
    if isinstance(model, Tree):
        weights = _tree_importances(model)
    else:
        weights = np.mean([_tree_importances(t) for t in model.trees], axis=0)
        s = weights.sum()
        if s > 0:
            weights = weights / s
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(model.n_features)]
    if len(names) != model.n_features:
        raise ArityMismatch(f"{len(names)} names for {model.n_features} features")
    return {name: float(w) for name, w in zip(names, weights)}


# ── split ───────────────────────────────────────────────────────────────
def split_sizes(n: int, test_fraction: float) -> Tuple[int, int]:
    n_test = math.ceil(round(n * test_fraction, 9))
    return n - n_test, n_test


def train_test_split(rows, test_fraction: float, seed: int):
    """Seeded shuffle, then the first floor(n(1-f)) rows train and the rest test."""
    n = len(rows)
    n_train, n_test = split_sizes(n, test_fraction)
    if n_train == 0 or n_test == 0:
        raise DegenerateSplit(f"Splitting {n} rows at {test_fraction} leaves one side empty")
    perm = np.random.default_rng(seed).permutation(n)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    if isinstance(rows, pd.DataFrame):
        return rows.iloc[train_idx].reset_index(drop=True), rows.iloc[test_idx].reset_index(drop=True)
    if isinstance(rows, np.ndarray):
        return rows[train_idx], rows[test_idx]
    return [rows[i] for i in train_idx], [rows[i] for i in test_idx]


# ── persistence ─────────────────────────────────────────────────────────
class SavedModel(BaseModel):
    format_version: int = FORMAT_VERSION
    feature_names: List[str]
    feature_defaults: List[float]
    pipeline: Dict[str, Any] = {}
    model: Annotated[Union[Tree, Forest], Field(discriminator="kind")]

    @property
    def kind(self) -> str:
        return self.model.kind


def save_model(model: Model, path: Union[str, Path], feature_names: Sequence[str],
               feature_defaults: Sequence[float], pipeline: Optional[Dict[str, Any]] = None) -> Path:
    saved = SavedModel(feature_names=list(feature_names), feature_defaults=[float(v) for v in feature_defaults],
                       pipeline=pipeline or {}, model=model)
    payload = saved.model_dump(mode="json")
    payload = {"format_version": payload.pop("format_version"), "kind": model.kind, **payload}
    path = Path(path)
    path.write_text(json.dumps(payload, indent=1, sort_keys=False), encoding="utf-8")
    return path


def load_model(path: Union[str, Path]) -> SavedModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"Cannot read model file {path}: {e}")
    except json.JSONDecodeError as e:
        raise InputError(f"Model file {path} is not valid JSON: {e}")
    if data.get("format_version") != FORMAT_VERSION:
        raise InputError(f"Model file {path} has unsupported format_version {data.get('format_version')!r}")
    data.pop("kind", None)
    try:
        saved = SavedModel.model_validate(data)
    except ValidationError as e:
        raise InputError(f"Model file {path} is invalid: {e.error_count()} errors")
    if len(saved.feature_names) != saved.model.n_features or len(saved.feature_defaults) != saved.model.n_features:
        raise InputError(f"Model file {path}: feature list does not match the model arity")
    return saved
