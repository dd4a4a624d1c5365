"""Synthetic instances for experiments and tests."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .baselines import greedy_cluster
from .jetgen import JetConfig, GeneratedJet, generate_jet
from .models import DasguptaModel, PairwiseWeights
from .oracle import oracle_summary


def random_similarity_weights(n: int, seed, low: float = 0.0, high: float = 1.0) -> PairwiseWeights:
    """Nonnegative symmetric weights, e.g. for cut-cost scoring."""
    if low < 0:
        raise ValueError("similarities must be nonnegative")
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            w[i, j] = w[j, i] = rng.uniform(low, high)
    return PairwiseWeights(w)


def random_affinity_weights(n: int, seed) -> PairwiseWeights:
    """Signed symmetric affinities in [-1, 1]."""
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            w[i, j] = w[j, i] = rng.uniform(-1.0, 1.0)
    return PairwiseWeights(w)


def jet_corpus(count: int, seed, config: JetConfig | None = None) -> list[GeneratedJet]:
    """Independent jets; jet i is reproducible from (seed, i) alone."""
    base = config if config is not None else JetConfig()
    return [generate_jet(replace(base, seed=(seed, i))) for i in range(count)]


def find_greedy_suboptimal_weights(
    n: int = 6, start_seed: int = 0, attempts: int = 1000, margin: float = 1e-6
) -> tuple[PairwiseWeights, int]:
    """Sweep random graphs until greedy agglomeration is strictly beaten.

    Returns the first instance (and its seed) whose exhaustive-search
    minimum cut cost is below the greedy tree's cost by more than the
    margin.
    """
    from .core import GroundSet

    for seed in range(start_seed, start_seed + attempts):
        weights = random_similarity_weights(n, seed)
        model = DasguptaModel(weights)
        greedy_score, _ = greedy_cluster(model)
        best_score = oracle_summary(GroundSet(n), model).map_log_potential
        # log psi = -cost, so a strictly larger optimum means greedy lost.
        if best_score > greedy_score + margin:
            return weights, seed
    raise RuntimeError(f"no greedy-suboptimal graph found in {attempts} attempts")


# Frozen instance from the sweep above: the first seed (from 0) where the
# exhaustive optimum beats greedy on a 6-leaf similarity graph.
ADVERSARIAL_N = 6
ADVERSARIAL_SEED = 0


def greedy_adversarial_weights() -> PairwiseWeights:
    """A fixed similarity graph on which greedy agglomeration is suboptimal."""
    return random_similarity_weights(ADVERSARIAL_N, ADVERSARIAL_SEED)
