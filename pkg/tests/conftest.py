"""Shared helpers for the test suite."""

from __future__ import annotations

from hctrellis import ConstantModel, CorrelationModel, DasguptaModel, GinkgoModel
from hctrellis.datasets import random_affinity_weights, random_similarity_weights
from hctrellis.jetgen import JetConfig, generate_jet

MODEL_KINDS = ("dasgupta", "correlation", "ginkgo")


def make_model(kind: str, n: int, seed):
    """A random instance of one scoring model over n leaves."""
    if kind == "dasgupta":
        return DasguptaModel(random_similarity_weights(n, seed))
    if kind == "correlation":
        return CorrelationModel(random_affinity_weights(n, seed))
    if kind == "ginkgo":
        jet = exact_leaf_jet(n, seed)
        return GinkgoModel(jet.payloads, lam=jet.config.lam)
    if kind == "constant":
        return ConstantModel(n)
    raise ValueError(kind)


def exact_leaf_jet(n: int, seed, lam: float = 1.5):
    base = seed if isinstance(seed, tuple) else (seed,)
    # a softer cutoff makes 2-3 leaf jets common instead of one-in-a-thousand
    t_cut = 600.0 if n <= 3 else 35.0
    return generate_jet(
        JetConfig(lam=lam, t_cut=t_cut, seed=base + (n,), leaf_count_filter=(n, n))
    )

