"""Geometric medians, Fréchet means, and variance of finite tree sets.

Both estimators run the same proximal iteration: walk from the current
iterate toward one input tree along the connecting geodesic, with a step
size that shrinks over time.  For the median the step is
min(1, 1/((i+1) d)); for the mean it is 1/(i+2), which reproduces the
running arithmetic mean whenever all inputs share one orthant.  Input
trees are visited in random order by default, or cyclically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .geodesic import distance, geodesic
from .treespace import Tree

_CLEANUP_EPS = 1e-12


@dataclass(frozen=True)
class EstimatorConfig:
    """Iteration controls shared by mean and median."""

    order: str = "random"
    iterations: int | None = None  # None means 1000 * len(trees)
    seed: int = 0
    tolerance: float = 0.0  # early stop on displacement; 0 disables

    def __post_init__(self):
        if self.order not in ("random", "cyclic"):
            raise ValueError(f"order must be 'random' or 'cyclic', got {self.order!r}")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")


def _check_inputs(trees, cfg: EstimatorConfig) -> int:
    if not trees:
        raise ValueError("no input trees")
    taxa = trees[0].taxa
    for tree in trees:
        if tree.taxa != taxa:
            raise ValueError("trees are over different taxon tables")
    if cfg.iterations is not None:
        return cfg.iterations
    return 1000 * len(trees)


def _drop_tiny_splits(tree: Tree) -> Tree:
    inner = {s: l for s, l in tree.inner.items() if l >= _CLEANUP_EPS}
    if len(inner) == len(tree.inner):
        return tree
    return Tree(tree.taxa, tree.leaf_lengths, inner)


def _iterates(
    trees, cfg: EstimatorConfig, step_size
) -> Iterator[tuple[Tree, float]]:
    """Yield (iterate, step) pairs of the proximal walk; shared by both estimators."""
    count = len(trees)
    rng = np.random.default_rng(cfg.seed)
    current = trees[0]
    i = 0
    while True:
        if cfg.order == "random":
            pick = int(rng.integers(count))
        else:
            pick = i % count
        target = trees[pick]
        dist = distance(current, target)
        if dist > 0.0:
            eta = step_size(i, dist)
            assert 0.0 < eta <= 1.0
            current = geodesic(current, target).point(eta)
        yield current, dist
        i += 1


def _run(trees, cfg: EstimatorConfig, step_size) -> Tree:
    iterations = _check_inputs(trees, cfg)
    count = len(trees)
    checkpoint = trees[0]
    walk = _iterates(trees, cfg, step_size)
    current = trees[0]
    for i in range(iterations):
        current, _ = next(walk)
        if cfg.tolerance > 0.0 and (i + 1) % count == 0:
            moved = distance(checkpoint, current)
            if moved < cfg.tolerance:
                break
            checkpoint = current
    return _drop_tiny_splits(current)


def median(trees, cfg: EstimatorConfig = EstimatorConfig()) -> Tree:
    """Approximate the geometric median (minimizer of the summed distance).

    The result may be non-unique when the inputs lie on one geodesic; the
    iteration then converges to some point of the median set.
    """
    return _run(trees, cfg, lambda i, d: min(1.0, 1.0 / ((i + 1) * d)))


def mean(trees, cfg: EstimatorConfig = EstimatorConfig()) -> Tree:
    """Approximate the Fréchet mean (minimizer of the summed squared distance)."""
    return _run(trees, cfg, lambda i, d: 1.0 / (i + 2))


def variance(trees, at: Tree) -> float:
    """Mean squared distance from `at` to the trees; Var(T) when `at` is the mean."""
    if not trees:
        raise ValueError("no input trees")
    return sum(distance(at, t) ** 2 for t in trees) / len(trees)


def frechet_objective(trees, at: Tree) -> float:
    """The mean objective (1/K) sum of squared distances, evaluated at `at`."""
    return variance(trees, at)


def median_objective(trees, at: Tree) -> float:
    """The median objective (1/K) sum of distances, evaluated at `at`."""
    if not trees:
        raise ValueError("no input trees")
    return sum(distance(at, t) for t in trees) / len(trees)
