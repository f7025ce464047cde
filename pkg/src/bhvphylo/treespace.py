"""Metric n-trees, splits, compatibility, and Newick serialization.

A tree over leaves 0..n is stored as a taxon table (index 0 is the
outgroup leaf), a dense vector of n+1 leaf edge lengths, and a map from
inner-edge splits to positive lengths.  Splits are normalized to the
side of the bipartition that does not contain leaf 0 and kept as
bitmasks, so compatibility reduces to three mask tests.  Inner edges of
length zero are represented by absence from the map; trees with fewer
than n-2 inner edges are valid non-binary trees.

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass


class NewickError(ValueError):
    """Malformed Newick text; carries a character offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class InvalidTreeError(ValueError):
    """A tree value violating the structural invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class TaxonTable:
    """Ordered, distinct taxon labels; index 0 is the outgroup leaf."""

    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) < 4:
            raise ValueError(f"need at least 4 taxa, got {len(self.names)}")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate taxon label")
        if any(not name for name in self.names):
            raise ValueError("empty taxon label")

    @property
    def n(self) -> int:
        """Leaves are labeled 0..n; returns n."""
        return len(self.names) - 1

    @property
    def size(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown taxon {name!r}") from None


@dataclass(frozen=True, order=True)
class Split:
    """One inner-edge bipartition, as the bitmask of the side without leaf 0."""

    bits: int
    n_leaves: int

    def __post_init__(self):
        if self.bits & 1:
            raise ValueError("split mask must not contain leaf 0")
        if self.bits >> self.n_leaves:
            raise ValueError("split mask outside leaf range")
        size = self.size
        if size < 2 or size > self.n_leaves - 2:
            raise ValueError(
                f"split side must have 2..{self.n_leaves - 2} leaves, got {size}"
            )

    @classmethod
    def of(cls, leaves, n_leaves: int) -> "Split":
        """Build a split from either side of the bipartition (normalizes)."""
        bits = 0
        for i in leaves:
            if i < 0 or i >= n_leaves:
                raise ValueError(f"leaf index {i} out of range")
            bits |= 1 << i
        if bits & 1:
            bits = ((1 << n_leaves) - 1) ^ bits
        return cls(bits, n_leaves)

    @property
    def size(self) -> int:
        return self.bits.bit_count()

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_leaves) if self.bits >> i & 1)

    def __contains__(self, leaf: int) -> bool:
        return bool(self.bits >> leaf & 1)

    def __repr__(self):
        return f"Split({{{','.join(map(str, self.indices()))}}}/{self.n_leaves})"


def compatible(a: Split, b: Split) -> bool:
    """True iff the two splits can coexist in one tree.

    With masks normalized away from leaf 0 this holds exactly when one
    mask contains the other or they are disjoint.
    """
    if a.n_leaves != b.n_leaves:
        raise ValueError(
            f"splits over different leaf counts ({a.n_leaves} vs {b.n_leaves}) "
            "are incomparable"
        )
    meet = a.bits & b.bits
    return meet == 0 or meet == a.bits or meet == b.bits


@dataclass(frozen=True, eq=False)
class Tree:
    """A metric n-tree: taxa, leaf edge lengths, and inner splits with lengths."""

    taxa: TaxonTable
    leaf_lengths: tuple[float, ...]
    inner: dict[Split, float]

    def __post_init__(self):
        object.__setattr__(self, "leaf_lengths", tuple(self.leaf_lengths))
        object.__setattr__(self, "inner", dict(self.inner))

    @property
    def n(self) -> int:
        return self.taxa.n

    def splits(self) -> frozenset[Split]:
        return frozenset(self.inner)

    def sorted_splits(self) -> list[Split]:
        return sorted(self.inner)

    def is_binary(self) -> bool:
        return len(self.inner) == self.n - 2

    def with_leaf_length(self, leaf: int, length: float) -> "Tree":
        lengths = list(self.leaf_lengths)
        lengths[leaf] = length
        return Tree(self.taxa, tuple(lengths), self.inner)

    def with_inner_length(self, split: Split, length: float) -> "Tree":
        if split not in self.inner:
            raise KeyError(f"{split} not in tree")
        inner = dict(self.inner)
        inner[split] = length
        return Tree(self.taxa, self.leaf_lengths, inner)

    def with_split_replaced(self, old: Split, new: Split) -> "Tree":
        inner = dict(self.inner)
        length = inner.pop(old)
        inner[new] = length
        return Tree(self.taxa, self.leaf_lengths, inner)

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return (
            self.taxa == other.taxa
            and self.leaf_lengths == other.leaf_lengths
            and self.inner == other.inner
        )


@dataclass(frozen=True)
class Orthant:
    """A compatible split set, identifying one orthant of tree space."""

    splits: frozenset[Split]

    def __post_init__(self):
        object.__setattr__(self, "splits", frozenset(self.splits))
        ordered = sorted(self.splits)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                if not compatible(a, b):
                    raise ValueError(f"incompatible splits {a} and {b}")
        if ordered:
            n_leaves = ordered[0].n_leaves
            if len(self.splits) > n_leaves - 3:
                raise ValueError("too many splits for the leaf count")

    @classmethod
    def of_tree(cls, tree: Tree) -> "Orthant":
        return cls(frozenset(tree.inner))

    @property
    def dim(self) -> int:
        return len(self.splits)


def validate(tree: Tree) -> list[str]:
    """Return all violated tree invariants (empty list when valid)."""
    problems = []
    n_leaves = tree.taxa.size
    if len(tree.leaf_lengths) != n_leaves:
        problems.append(
            f"leaf length vector has {len(tree.leaf_lengths)} entries, "
            f"expected {n_leaves}"
        )
    for i, length in enumerate(tree.leaf_lengths):
        if not (length > 0.0) or length != length or length == float("inf"):
            problems.append(f"non-positive length on leaf edge {i}")
    if len(tree.inner) > tree.n - 2:
        problems.append(
            f"{len(tree.inner)} inner splits exceeds maximum {tree.n - 2}"
        )
    for split, length in tree.inner.items():
        if split.n_leaves != n_leaves:
            problems.append(f"{split} is over {split.n_leaves} leaves, tree has {n_leaves}")
        if not (length > 0.0) or length != length or length == float("inf"):
            problems.append(f"non-positive length on inner edge {split}")
    ordered = sorted(s for s in tree.inner if s.n_leaves == n_leaves)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if not compatible(a, b):
                problems.append(f"incompatible splits {a} and {b}")
    return problems


def check(tree: Tree) -> Tree:
    """Validate and return the tree, raising InvalidTreeError on problems."""
    problems = validate(tree)
    if problems:
        raise InvalidTreeError(problems)
    return tree


def trees_close(a: Tree, b: Tree, tol: float = 1e-12) -> bool:
    """Same taxa and splits, all lengths within tol."""
    if a.taxa != b.taxa or a.splits() != b.splits():
        return False
    if any(abs(x - y) > tol for x, y in zip(a.leaf_lengths, b.leaf_lengths)):
        return False
    return all(abs(a.inner[s] - b.inner[s]) <= tol for s in a.inner)


def example_tree_splits() -> frozenset[Split]:
    """Splits of a 7-leaf example tree with three inner edges.

    The tree groups leaves {1,2,3}, {4,5,6}, and {5,6}; it is non-binary
    (a 7-leaf binary tree would have four inner edges).
    """
    return frozenset(
        Split.of(side, 7) for side in ({1, 2, 3}, {4, 5, 6}, {5, 6})
    )


# ---------------------------------------------------------------------------
# Explicit topology (used for serialization, pruning, and NNI moves)

class Node:
    """A vertex of the rooted topology; the root is the vertex next to leaf 0."""

    __slots__ = ("leaf", "mask", "length", "children")

    def __init__(self, leaf, mask, length):
        self.leaf = leaf          # leaf index or None for internal vertices
        self.mask = mask          # bitmask of leaves below this vertex
        self.length = length      # edge length toward the parent; None at root
        self.children = []

    def is_leaf(self) -> bool:
        return self.leaf is not None


def _min_leaf(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def tree_topology(tree: Tree) -> Node:
    """Build the explicit vertex structure, rooted at leaf 0's neighbor.

    Children are ordered by smallest contained leaf, with leaf 0 last,
    so the layout is deterministic for a given tree.
    """
    n_leaves = tree.taxa.size
    full = (1 << n_leaves) - 1
    root = Node(None, full, None)
    nodes = [Node(None, s.bits, length) for s, length in sorted(tree.inner.items())]
    # parent of a split node: the smallest strict superset among the others
    by_size = sorted(nodes, key=lambda v: v.mask.bit_count())
    for i, node in enumerate(by_size):
        parent = root
        for other in by_size[i + 1 :]:
            if node.mask & other.mask == node.mask and other.mask != node.mask:
                parent = other
                break
        parent.children.append(node)
    for leaf in range(n_leaves):
        leaf_node = Node(leaf, 1 << leaf, tree.leaf_lengths[leaf])
        parent = root
        best = None
        for node in nodes:
            if node.mask >> leaf & 1:
                if best is None or node.mask.bit_count() < best.mask.bit_count():
                    best = node
        if best is not None:
            parent = best
        parent.children.append(leaf_node)
    _sort_children(root)
    return root


def _sort_children(node: Node) -> None:
    # leaf 0 first, so that the first-listed taxon of the serialization is
    # the outgroup and a default re-parse rebuilds the same taxon table
    node.children.sort(key=lambda c: (c.mask != 1, _min_leaf(c.mask)))
    for child in node.children:
        _sort_children(child)


# ---------------------------------------------------------------------------
# Newick

_NAME_STOP = frozenset("(),:;")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        raise NewickError(message, self.pos)

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        if self.pos >= len(self.text):
            self.error("unexpected end of input")
        return self.text[self.pos]

    def take(self, char: str) -> None:
        if self.peek() != char:
            self.error(f"expected {char!r}")
        self.pos += 1

    def name(self) -> str:
        self.peek()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in _NAME_STOP:
            self.pos += 1
        name = self.text[start : self.pos].strip()
        if not name:
            self.pos = start
            self.error("expected a taxon name")
        return name

    def length(self) -> float:
        self.take(":")
        self.peek()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isdigit() or self.text[self.pos] in ".eE+-"
        ):
            self.pos += 1
        token = self.text[start : self.pos]
        try:
            value = float(token)
        except ValueError:
            self.pos = start
            self.error(f"bad branch length {token!r}")
        return value

    def node(self, is_root: bool):
        """Returns (name, children, length, offset); length None only at root."""
        offset = self.pos
        if self.peek() == "(":
            self.take("(")
            children = [self.node(False)]
            while self.peek() == ",":
                self.take(",")
                children.append(self.node(False))
            self.take(")")
            name = None
            if self.peek() not in _NAME_STOP:
                self.name()  # internal node label (e.g. support value), ignored
        else:
            name = self.name()
            children = []
        length = None
        if self.peek() == ":":
            length = self.length()
        if length is None and not is_root:
            self.error("missing branch length")
        return name, children, length, offset


def parse_newick(
    text: str,
    *,
    taxa: TaxonTable | None = None,
    outgroup: str | None = None,
) -> Tree:
    """Parse one rooted Newick string into a Tree.

    Every edge must carry a branch length (a length on the root vertex is
    ignored).  The outgroup taxon becomes leaf 0; by default it is the
    first-listed taxon, unless an existing taxon table fixes the order.
    """
    parser = _Parser(text)
    root = parser.node(True)
    if parser.peek() != ";":
        parser.error("expected ';'")
    parser.pos += 1

    names: list[str] = []

    def collect(node):
        name, children, _, offset = node
        if not children:
            if name in names:
                raise NewickError(f"duplicate taxon {name!r}", offset)
            names.append(name)
        for child in children:
            collect(child)

    collect(root)
    if len(names) < 4:
        raise NewickError(f"fewer than 4 leaves ({len(names)})")

    if taxa is not None:
        if set(names) != set(taxa.names):
            raise NewickError("taxon set does not match the given taxon table")
        if outgroup is not None and outgroup != taxa.names[0]:
            raise NewickError(f"outgroup {outgroup!r} is not leaf 0 of the taxon table")
    else:
        # canonical table: outgroup (or the first-listed taxon) first, the
        # rest sorted, so that serializations re-parse to the same table
        if outgroup is None:
            outgroup = names[0]
        elif outgroup not in names:
            raise NewickError(f"outgroup {outgroup!r} not among the taxa")
        taxa = TaxonTable((outgroup, *sorted(n for n in names if n != outgroup)))

    n_leaves = taxa.size
    full = (1 << n_leaves) - 1
    leaf_lengths = [0.0] * n_leaves
    inner: dict[Split, float] = {}

    def walk(node, is_root: bool = False) -> int:
        name, children, length, offset = node
        if children:
            below = 0
            for child in children:
                below |= walk(child)
        else:
            below = 1 << taxa.index(name)
        if length is not None and not is_root:
            if not length > 0.0:
                raise NewickError(f"zero/negative branch length {length!r}", offset)
            side = below if not below & 1 else full ^ below
            count = side.bit_count()
            if count == 1:
                leaf_lengths[_min_leaf(side)] += length
            elif count == n_leaves - 1:
                leaf_lengths[0] += length
            else:
                split = Split(side, n_leaves)
                inner[split] = inner.get(split, 0.0) + length
        return below

    walk(root, is_root=True)
    return check(Tree(taxa, tuple(leaf_lengths), inner))


def serialize_newick(tree: Tree) -> str:
    """Render the tree rooted at leaf 0's neighbor, with full-precision lengths."""
    root = tree_topology(tree)

    def render(node: Node) -> str:
        if node.is_leaf():
            body = tree.taxa.names[node.leaf]
        else:
            body = "(" + ",".join(render(c) for c in node.children) + ")"
        if node.length is None:
            return body
        return f"{body}:{node.length:.17g}"

    return render(root) + ";"


def load_samples(path, *, outgroup: str | None = None) -> list[Tree]:
    """Read a samples file (one Newick per line, '#' lines are comments).

    The first tree fixes the taxon table; all following trees must use
    the same taxon set and are indexed against it.
    """
    trees: list[Tree] = []
    taxa: TaxonTable | None = None
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                tree = parse_newick(line, taxa=taxa, outgroup=outgroup if taxa is None else None)
            except NewickError as exc:
                raise NewickError(f"line {lineno}: {exc}") from exc
            taxa = tree.taxa
            trees.append(tree)
    return trees


# ---------------------------------------------------------------------------
# Topology generation (random trees and exhaustive enumeration)

def _splits_of_adjacency(adj: dict[int, set[int]], n_leaves: int) -> frozenset[Split]:
    splits = set()
    inner = [v for v in adj if v >= n_leaves]
    for v in inner:
        for w in adj[v]:
            if w < n_leaves or w < v:
                continue
            # leaves on w's side of the edge v-w
            seen = {v, w}
            stack = [w]
            side = 0
            while stack:
                u = stack.pop()
                if u < n_leaves:
                    side |= 1 << u
                for x in adj[u]:
                    if x not in seen:
                        seen.add(x)
                        stack.append(x)
            splits.add(Split.of((i for i in range(n_leaves) if side >> i & 1), n_leaves))
    return frozenset(splits)


def _edges_of(adj: dict[int, set[int]]) -> list[tuple[int, int]]:
    return sorted((v, w) for v in adj for w in adj[v] if v < w)


def random_binary_splits(n_leaves: int, rng) -> frozenset[Split]:
    """Uniform random binary topology via sequential random edge insertion."""
    if n_leaves < 4:
        raise ValueError("need at least 4 leaves")
    center = n_leaves
    adj = {0: {center}, 1: {center}, 2: {center}, center: {0, 1, 2}}
    next_vertex = n_leaves + 1
    for leaf in range(3, n_leaves):
        edges = _edges_of(adj)
        v, w = edges[int(rng.integers(len(edges)))]
        adj[v].discard(w)
        adj[w].discard(v)
        mid = next_vertex
        next_vertex += 1
        adj[mid] = {v, w, leaf}
        adj[v].add(mid)
        adj[w].add(mid)
        adj[leaf] = {mid}
    return _splits_of_adjacency(adj, n_leaves)


def enumerate_binary_topologies(n_leaves: int) -> set[frozenset[Split]]:
    """All binary split sets on the leaf set, by exhaustive leaf insertion."""
    if n_leaves < 4:
        raise ValueError("need at least 4 leaves")
    center = n_leaves
    start = {0: {center}, 1: {center}, 2: {center}, center: {0, 1, 2}}
    partial = [(start, n_leaves + 1)]
    for leaf in range(3, n_leaves):
        grown = []
        for adj, next_vertex in partial:
            for v, w in _edges_of(adj):
                new = {u: set(nbrs) for u, nbrs in adj.items()}
                new[v].discard(w)
                new[w].discard(v)
                new[next_vertex] = {v, w, leaf}
                new[v].add(next_vertex)
                new[w].add(next_vertex)
                new[leaf] = {next_vertex}
                grown.append((new, next_vertex + 1))
        partial = grown
    return {_splits_of_adjacency(adj, n_leaves) for adj, _ in partial}
