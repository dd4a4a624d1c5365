"""Sparse trellis: the same recursions restricted to seeded vertices/edges.

A sparse trellis stores, per vertex, the explicit list of child pairs seen
in its seed trees; inference runs the usual bottom-up recursions over the
stored pairs only, so the partition function and MAP are lower bounds on
their dense counterparts and the sampler draws from the posterior
restricted to realizable hierarchies.  Edges matter, not just vertices:
two trellises on the same vertex set can realize very different tree
counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core import (
    LOG_ZERO,
    GroundSet,
    Hierarchy,
    log_sum_exp,
    lowest_leaf,
    num_hierarchies,
    popcount,
    relabel_hierarchy,
)
from .baselines import beam_search_forest
from .jetgen import JetConfig, generate_jet
from .models import PotentialModel, log_hierarchy_potential

ORDERING_MODES = ("standard", "random", "norm_ascending")


@dataclass(frozen=True)
class LeafOrdering:
    """How input-tree leaves map onto trellis leaf indices.

    standard:        leaves keep the order in which tree traversal visits
                     them (root-down, left child first).
    random:          a fresh seeded permutation per input tree.
    norm_ascending:  leaves sorted by the norm of their momentum vector.
    """

    mode: str = "standard"
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ORDERING_MODES:
            raise ValueError(f"unknown ordering mode {self.mode!r}")

    def permutation_for_tree(self, tree: Hierarchy, payloads, rng) -> list[int]:
        n = tree.num_leaves()
        if self.mode == "standard":
            order = _traversal_leaves(tree)
        elif self.mode == "random":
            order = [int(i) for i in rng.permutation(n)]
        else:
            order = _norm_order(payloads)
        perm = [0] * n
        for new, old in enumerate(order):
            perm[old] = new
        return perm

    def order_payloads(self, payloads) -> list:
        """Positional payload binding for a fresh dataset at query time."""
        n = len(payloads)
        if self.mode == "standard":
            return list(payloads)
        if self.mode == "random":
            rng = np.random.default_rng(self.seed)
            return [payloads[int(i)] for i in rng.permutation(n)]
        return [payloads[i] for i in _norm_order(payloads)]


def _traversal_leaves(tree: Hierarchy) -> list[int]:
    order = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if popcount(node) == 1:
            order.append(lowest_leaf(node))
            continue
        left, right = tree.children[node]
        stack.append(right)
        stack.append(left)
    return order


def _norm_order(payloads) -> list[int]:
    if payloads is None:
        raise ValueError("norm_ascending ordering needs leaf payloads")
    norms = [p.p3_norm for p in payloads]
    return sorted(range(len(norms)), key=lambda i: (norms[i], i))


class SparseTrellis:
    """Vertices plus explicit child pairs, pruned of dead ends."""

    def __init__(
        self,
        ground: GroundSet,
        vertices: dict[int, list[tuple[int, int]]],
        ordering: LeafOrdering | None = None,
    ):
        self.ground = ground
        self.ordering = ordering
        self.vertices = self._canonicalize(vertices)
        self._prune()
        self._validate()
        self._counts: dict[int, int] | None = None

    def _canonicalize(self, vertices) -> dict[int, list[tuple[int, int]]]:
        out: dict[int, list[tuple[int, int]]] = {}
        for v, pairs in vertices.items():
            canon = set()
            for l, r in pairs:
                if (l | r) != v or (l & r) != 0 or l == 0 or r == 0:
                    raise ValueError(f"pair ({l:#x}, {r:#x}) does not split vertex {v:#x}")
                if not l & (v & -v):
                    l, r = r, l
                canon.add((l, r))
            out[v] = sorted(canon)
        return out

    def _prune(self) -> None:
        # Drop pairs that reference absent vertices and vertices that cannot
        # reach singletons through stored pairs, then anything unreachable
        # from the root.
        vertices = self.vertices
        while True:
            changed = False
            for v, pairs in vertices.items():
                kept = [(l, r) for l, r in pairs if l in vertices and r in vertices]
                if len(kept) != len(pairs):
                    vertices[v] = kept
                    changed = True
            dead = {v for v, p in vertices.items() if popcount(v) > 1 and not p}
            if dead:
                changed = True
                for v in dead:
                    del vertices[v]
            if not changed:
                break
        root = self.ground.full
        if root not in vertices:
            raise ValueError("the root vertex realizes no hierarchy")
        reachable = set()
        stack = [root]
        while stack:
            v = stack.pop()
            if v in reachable:
                continue
            reachable.add(v)
            for l, r in vertices[v]:
                stack.append(l)
                stack.append(r)
        self.vertices = {v: vertices[v] for v in sorted(reachable)}

    def _validate(self) -> None:
        for i in range(self.ground.n):
            if (1 << i) not in self.vertices:
                raise ValueError("trellis is missing a singleton vertex")
        for v, pairs in self.vertices.items():
            if popcount(v) > 1 and not pairs:
                raise ValueError(f"vertex {v:#x} has no child pairs")

    # -- structure queries ----------------------------------------------------

    @property
    def root(self) -> int:
        return self.ground.full

    def num_vertices(self) -> int:
        return len(self.vertices)

    def num_edges(self) -> int:
        return sum(len(p) for p in self.vertices.values())

    def count_trees(self) -> int:
        """Hierarchies realizable from the stored pairs (exact big int)."""
        if self._counts is None:
            counts: dict[int, int] = {}
            for v in sorted(self.vertices, key=popcount):
                if popcount(v) == 1:
                    counts[v] = 1
                else:
                    counts[v] = sum(counts[l] * counts[r] for l, r in self.vertices[v])
            self._counts = counts
        return self._counts[self.root]

    def sparsity_index(self) -> Fraction:
        """Fraction of all (2n-3)!! hierarchies this trellis realizes."""
        return Fraction(self.count_trees(), num_hierarchies(self.ground.n))

    def realizes(self, h: Hierarchy) -> bool:
        if h.root != self.root:
            return False
        for parent, pair in h.children.items():
            if parent not in self.vertices or pair not in self.vertices[parent]:
                return False
        return True

    # -- inference -------------------------------------------------------------

    def evaluate(self, model: PotentialModel) -> "SparseEvaluation":
        return SparseEvaluation(self, model)

    # -- serialization -----------------------------------------------------------

    def to_dict(self) -> dict:
        ordering = None
        if self.ordering is not None:
            ordering = {"mode": self.ordering.mode, "seed": self.ordering.seed}
        return {
            "n": self.ground.n,
            "ordering": ordering,
            "vertices": [
                {
                    "bits": str(v),
                    "pairs": [[str(l), str(r)] for l, r in pairs],
                }
                for v, pairs in sorted(self.vertices.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SparseTrellis":
        ordering = None
        if data.get("ordering"):
            ordering = LeafOrdering(data["ordering"]["mode"], data["ordering"].get("seed"))
        vertices = {
            int(entry["bits"]): [(int(l), int(r)) for l, r in entry["pairs"]]
            for entry in data["vertices"]
        }
        return cls(GroundSet(int(data["n"])), vertices, ordering)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "SparseTrellis":
        return cls.from_dict(json.loads(Path(path).read_text()))


class SparseEvaluation:
    """Bottom-up memo of one model over a sparse trellis."""

    def __init__(self, trellis: SparseTrellis, model: PotentialModel):
        if model.n != trellis.ground.n:
            raise ValueError("model and trellis disagree on the leaf count")
        self.trellis = trellis
        self.model = model
        self.log_z: dict[int, float] = {}
        self._map_val: dict[int, float] = {}
        self._map_pair: dict[int, tuple[int, int]] = {}
        self._psi: dict[int, list[float]] = {}
        self._sample_cache: dict[int, np.ndarray] = {}
        self._fill()

    def _fill(self) -> None:
        for v in sorted(self.trellis.vertices, key=popcount):
            pairs = self.trellis.vertices[v]
            if popcount(v) == 1:
                self.log_z[v] = 0.0
                self._map_val[v] = 0.0
                continue
            psi = [self.model.log_psi(l, r) for l, r in pairs]
            self._psi[v] = psi
            z_terms = [p + self.log_z[l] + self.log_z[r] for p, (l, r) in zip(psi, pairs)]
            self.log_z[v] = log_sum_exp(z_terms)
            best_idx = 0
            best = None
            for idx, (p, (l, r)) in enumerate(zip(psi, pairs)):
                val = p + self._map_val[l] + self._map_val[r]
                if best is None or val > best:
                    best = val
                    best_idx = idx
            self._map_val[v] = best
            self._map_pair[v] = pairs[best_idx]

    def log_partition(self) -> float:
        return self.log_z[self.trellis.root]

    def map_hierarchy(self) -> tuple[float, Hierarchy]:
        """Best realizable tree; the value is its recomputed potential."""
        children: dict[int, tuple[int, int]] = {}
        stack = [self.trellis.root]
        while stack:
            v = stack.pop()
            if popcount(v) == 1:
                continue
            pair = self._map_pair[v]
            children[v] = pair
            stack.append(pair[0])
            stack.append(pair[1])
        tree = Hierarchy(self.trellis.root, children)
        return log_hierarchy_potential(tree, self.model), tree

    def _split_distribution(self, v: int) -> np.ndarray:
        cum = self._sample_cache.get(v)
        if cum is None:
            pairs = self.trellis.vertices[v]
            terms = np.array(
                [
                    p + self.log_z[l] + self.log_z[r]
                    for p, (l, r) in zip(self._psi[v], pairs)
                ]
            )
            cum = np.cumsum(np.exp(terms - terms.max()))
            self._sample_cache[v] = cum
        return cum

    def sample(self, rng: np.random.Generator) -> Hierarchy:
        if self.log_partition() == LOG_ZERO:
            raise ValueError("degenerate posterior: restricted partition function is zero")
        children: dict[int, tuple[int, int]] = {}
        stack = [self.trellis.root]
        while stack:
            v = stack.pop()
            if popcount(v) == 1:
                continue
            pairs = self.trellis.vertices[v]
            if len(pairs) == 1:
                pick = 0
            else:
                cum = self._split_distribution(v)
                u = rng.random() * cum[-1]
                pick = min(int(np.searchsorted(cum, u, side="right")), len(pairs) - 1)
            pair = pairs[pick]
            children[v] = pair
            stack.append(pair[1])
            stack.append(pair[0])
        return Hierarchy(self.trellis.root, children)

    def sample_hierarchy(self, seed) -> Hierarchy:
        return self.sample(np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# builders


def build_from_trees(
    trees,
    ordering: LeafOrdering | None = None,
    payload_lists=None,
) -> SparseTrellis:
    """Union the nodes and splits of the input trees.

    With ``ordering=None`` the trees are assumed to share a ground set and
    their labels are kept; an ordering remaps each tree's leaves onto the
    trellis index space first, which is how trees from unrelated datasets
    are overlaid.
    """
    trees = list(trees)
    if not trees:
        raise ValueError("need at least one seed tree")
    n = trees[0].num_leaves()
    if any(t.num_leaves() != n for t in trees):
        raise ValueError("seed trees must share one leaf count")
    if payload_lists is None:
        payload_lists = [None] * len(trees)
    rng = np.random.default_rng(ordering.seed) if ordering is not None else None
    vertices: dict[int, set] = {1 << i: set() for i in range(n)}
    for tree, payloads in zip(trees, payload_lists):
        if ordering is not None:
            perm = ordering.permutation_for_tree(tree, payloads, rng)
            tree = relabel_hierarchy(tree, perm)
        for parent, pair in tree.children.items():
            vertices.setdefault(parent, set()).add(pair)
    return SparseTrellis(
        GroundSet(n),
        {v: sorted(pairs) for v, pairs in vertices.items()},
        ordering,
    )


def build_simulator_trellis(
    config: JetConfig, num_trees: int, ordering: LeafOrdering | None = None
) -> SparseTrellis:
    """Seed the trellis with ground-truth trees drawn from the generator."""
    if config.leaf_count_filter is None or (
        config.leaf_count_filter[0] != config.leaf_count_filter[1]
    ):
        raise ValueError("simulator seeding needs a fixed leaf count filter")
    trees, payloads = [], []
    for i in range(num_trees):
        jet = generate_jet(replace(config, seed=(config.seed, i)))
        trees.append(jet.tree)
        payloads.append(jet.payloads)
    return build_from_trees(trees, ordering, payloads)


def build_beam_search_trellis(
    payload_sets,
    make_model,
    ordering: LeafOrdering | None = None,
    beam_width: int | None = None,
    lookahead: int = 1,
) -> SparseTrellis:
    """Seed the trellis with every tree kept by beam search on each dataset."""
    trees, payloads = [], []
    for leaf_payloads in payload_sets:
        model = make_model(leaf_payloads)
        for _, tree in beam_search_forest(model, beam_width, lookahead):
            trees.append(tree)
            payloads.append(leaf_payloads)
    return build_from_trees(trees, ordering, payloads)
