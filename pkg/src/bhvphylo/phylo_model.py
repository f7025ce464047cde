"""Unnormalized log posterior: marginalized F81+Gaps likelihood and gamma priors.

Each alignment column evolves down the tree under the F81+Gaps model,
where a mutation on an edge of length l happens with probability
1 - exp(-l) and redraws the symbol from a site-specific stationary
distribution over {A, C, G, T, gap}.  The stationary distribution is
never estimated: a pruning pass from the leaves expresses the column
likelihood as a sparse polynomial in the stationary probabilities, and
each monomial integrates in closed form against a Dirichlet prior.
Edge lengths carry a gamma prior; the posterior is the product, left
unnormalized (the mixture weights over tree topologies cancel in the
sampler's acceptance ratio and are never evaluated).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

from scipy.special import gammaln

from .treespace import TaxonTable, Tree, tree_topology

ALPHABET = ("A", "C", "G", "T", "-")
N_SYMBOLS = 5
GAP = 4

_SYMBOL_INDEX = {"A": 0, "C": 1, "G": 2, "T": 3, "-": 4}


class ColumnLikelihoodError(ArithmeticError):
    """A column whose integrated likelihood is not a positive finite number."""

    def __init__(self, column: int, message: str):
        super().__init__(f"column {column}: {message}")
        self.column = column


def encode_symbol(symbol: str, *, warn: bool = True) -> int:
    """Map a character to the 5-letter alphabet; unknown symbols become gaps."""
    symbol = symbol.upper()
    if symbol in _SYMBOL_INDEX:
        return _SYMBOL_INDEX[symbol]
    if warn:
        warnings.warn(f"symbol {symbol!r} mapped to gap", stacklevel=2)
    return GAP


@dataclass(frozen=True)
class Alignment:
    """Aligned columns over the taxa, with duplicate columns counted once."""

    taxa: TaxonTable
    columns: tuple[tuple[int, ...], ...]
    pattern_index: dict[tuple[int, ...], int]

    def __post_init__(self):
        for column in self.columns:
            if len(column) != self.taxa.size:
                raise ValueError(
                    f"column has {len(column)} symbols, expected {self.taxa.size}"
                )
            if any(not 0 <= x < N_SYMBOLS for x in column):
                raise ValueError("symbol index outside the alphabet")
        if sum(self.pattern_index.values()) != len(self.columns):
            raise ValueError("pattern multiplicities do not sum to the column count")

    @classmethod
    def from_columns(cls, taxa: TaxonTable, columns) -> "Alignment":
        columns = tuple(tuple(c) for c in columns)
        patterns: dict[tuple[int, ...], int] = {}
        for column in columns:
            patterns[column] = patterns.get(column, 0) + 1
        return cls(taxa, columns, patterns)

    @classmethod
    def from_sequences(cls, taxa: TaxonTable, sequences) -> "Alignment":
        """Build from one string per taxon, in taxon order."""
        sequences = [str(s) for s in sequences]
        if len(sequences) != taxa.size:
            raise ValueError(f"{len(sequences)} sequences for {taxa.size} taxa")
        length = len(sequences[0])
        if any(len(s) != length for s in sequences):
            raise ValueError("sequences have unequal lengths")
        columns = [
            tuple(encode_symbol(seq[i]) for seq in sequences) for i in range(length)
        ]
        return cls.from_columns(taxa, columns)

    @property
    def n_columns(self) -> int:
        return len(self.columns)


@dataclass(frozen=True)
class DirichletPrior:
    """Pseudocounts of the Dirichlet prior on the stationary distribution."""

    alpha: tuple[float, ...] = (0.2,) * N_SYMBOLS

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if len(self.alpha) != N_SYMBOLS:
            raise ValueError(f"need {N_SYMBOLS} pseudocounts")
        if any(a <= 0 for a in self.alpha):
            raise ValueError("pseudocounts must be positive")


@dataclass(frozen=True)
class GammaPrior:
    """Gamma prior on every edge length (shape/scale convention)."""

    shape: float = 1.0
    scale: float = 0.1

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("shape and scale must be positive")

    def log_density(self, length: float) -> float:
        if length <= 0:
            return -math.inf
        return (
            (self.shape - 1.0) * math.log(length)
            - length / self.scale
            - self.shape * math.log(self.scale)
            - float(gammaln(self.shape))
        )


Exponents = tuple[int, int, int, int, int]

_ZERO: Exponents = (0, 0, 0, 0, 0)


@dataclass(frozen=True)
class MonomialPoly:
    """Sparse polynomial over the five stationary probabilities.

    Terms map an exponent vector (one exponent per symbol) to a real
    coefficient.  Zero coefficients are dropped.
    """

    terms: dict[Exponents, float]

    def __post_init__(self):
        object.__setattr__(
            self, "terms", {e: c for e, c in self.terms.items() if c != 0.0}
        )

    @classmethod
    def zero(cls) -> "MonomialPoly":
        return cls({})

    @classmethod
    def constant(cls, value: float) -> "MonomialPoly":
        return cls({_ZERO: value})

    @classmethod
    def symbol(cls, index: int, coeff: float = 1.0) -> "MonomialPoly":
        exps = [0] * N_SYMBOLS
        exps[index] = 1
        return cls({tuple(exps): coeff})

    def __add__(self, other: "MonomialPoly") -> "MonomialPoly":
        terms = dict(self.terms)
        for exps, coeff in other.terms.items():
            terms[exps] = terms.get(exps, 0.0) + coeff
        return MonomialPoly(terms)

    def scaled(self, factor: float) -> "MonomialPoly":
        return MonomialPoly({e: c * factor for e, c in self.terms.items()})

    def __mul__(self, other: "MonomialPoly") -> "MonomialPoly":
        terms: dict[Exponents, float] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                key = (
                    ea[0] + eb[0],
                    ea[1] + eb[1],
                    ea[2] + eb[2],
                    ea[3] + eb[3],
                    ea[4] + eb[4],
                )
                terms[key] = terms.get(key, 0.0) + ca * cb
        return MonomialPoly(terms)

    def shifted(self, index: int) -> "MonomialPoly":
        """Multiply by the stationary probability of one symbol."""
        terms = {}
        for exps, coeff in self.terms.items():
            lifted = list(exps)
            lifted[index] += 1
            terms[tuple(lifted)] = coeff
        return MonomialPoly(terms)

    def max_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def evaluate(self, theta) -> float:
        total = 0.0
        for exps, coeff in self.terms.items():
            value = coeff
            for i, e in enumerate(exps):
                if e:
                    value *= theta[i] ** e
            total += value
        return total


def mutation_prob(length: float) -> float:
    """Probability of at least one substitution on an edge (unit rate)."""
    if length <= 0:
        raise ValueError(f"edge length must be positive, got {length}")
    return -math.expm1(-length)


@lru_cache(maxsize=65536)
def _log_moment(counts: Exponents, alpha: tuple[float, ...]) -> float:
    total_alpha = sum(alpha)
    total = sum(counts)
    value = gammaln(total_alpha) - gammaln(total_alpha + total)
    for a, count in zip(alpha, counts):
        if count:
            value += gammaln(a + count) - gammaln(a)
    return float(value)


def log_dirichlet_moment(counts, prior: DirichletPrior) -> float:
    """Log of the Dirichlet moment E[prod theta_x^counts_x]."""
    return _log_moment(tuple(counts), prior.alpha)


def dirichlet_moment(counts, prior: DirichletPrior) -> float:
    """The simplex integral of one monomial against the Dirichlet prior."""
    if any(c < 0 or c != int(c) for c in counts):
        raise ValueError("counts must be nonnegative integers")
    return math.exp(log_dirichlet_moment(counts, prior))


# pruning internals work on bare term dicts to keep the sampler's inner
# loop off the dataclass machinery

def _mul_terms(left: dict, right: dict) -> dict:
    if len(left) > len(right):
        left, right = right, left
    if len(left) == 1:
        (ea, ca), = left.items()
        if ea == _ZERO:
            return {eb: ca * cb for eb, cb in right.items()}
        return {
            (
                ea[0] + eb[0],
                ea[1] + eb[1],
                ea[2] + eb[2],
                ea[3] + eb[3],
                ea[4] + eb[4],
            ): ca * cb
            for eb, cb in right.items()
        }
    out: dict = {}
    for ea, ca in left.items():
        for eb, cb in right.items():
            key = (
                ea[0] + eb[0],
                ea[1] + eb[1],
                ea[2] + eb[2],
                ea[3] + eb[3],
                ea[4] + eb[4],
            )
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def _shift_into(accum: dict, terms: dict, index: int, factor: float) -> None:
    for exps, coeff in terms.items():
        lifted = list(exps)
        lifted[index] += 1
        key = tuple(lifted)
        accum[key] = accum.get(key, 0.0) + coeff * factor


def _column_terms(root, column) -> dict:
    def upward(node) -> list[dict]:
        """Messages indexed by the parent state."""
        mut = mutation_prob(node.length)
        stay = 1.0 - mut
        if node.is_leaf():
            observed = column[node.leaf]
            exps = [0] * N_SYMBOLS
            exps[observed] = 1
            base = (tuple(exps), mut)
            messages = [dict([base])] * N_SYMBOLS
            messages[observed] = {base[0]: mut, _ZERO: stay}
            return messages
        below = state_products(node)
        # message(p) = mut * sum_x theta_x below(x) + stay * below(p)
        mixed: dict = {}
        for x in range(N_SYMBOLS):
            _shift_into(mixed, below[x], x, mut)
        messages = []
        for p in range(N_SYMBOLS):
            message = dict(mixed)
            for exps, coeff in below[p].items():
                message[exps] = message.get(exps, 0.0) + coeff * stay
            messages.append(message)
        return messages

    def state_products(node) -> list[dict]:
        products = None
        for child in node.children:
            messages = upward(child)
            if products is None:
                products = messages
            else:
                products = [
                    _mul_terms(products[x], messages[x]) for x in range(N_SYMBOLS)
                ]
        return products if products is not None else [{_ZERO: 1.0}] * N_SYMBOLS

    below_root = state_products(root)
    result: dict = {}
    for x in range(N_SYMBOLS):
        _shift_into(result, below_root[x], x, 1.0)
    return {exps: coeff for exps, coeff in result.items() if coeff != 0.0}


def column_poly(tree: Tree, column) -> MonomialPoly:
    """The column likelihood as a polynomial in the stationary distribution.

    A pruning pass from the leaves toward leaf 0's neighbor; each vertex
    sends its parent one polynomial per parent state, and the root state
    contributes one extra stationary factor.
    """
    column = tuple(column)
    if len(column) != tree.taxa.size:
        raise ValueError("column length does not match the taxa")
    if any(not 0 <= x < N_SYMBOLS for x in column):
        raise ValueError("symbol outside the alphabet")
    return MonomialPoly(_column_terms(tree_topology(tree), column))


def _log_pattern_likelihood(
    root, pattern, prior: DirichletPrior, column_index: int
) -> float:
    terms = _column_terms(root, pattern)
    if not terms:
        raise ColumnLikelihoodError(column_index, "empty column polynomial")
    alpha = prior.alpha
    logs = []
    for exps, coeff in terms.items():
        if coeff <= 0.0:
            raise ColumnLikelihoodError(
                column_index, f"nonpositive coefficient {coeff}"
            )
        logs.append(math.log(coeff) + _log_moment(exps, alpha))
    peak = max(logs)
    if peak == -math.inf:
        raise ColumnLikelihoodError(column_index, "likelihood underflow to zero")
    return peak + math.log(sum(math.exp(l - peak) for l in logs))


def log_likelihood(tree: Tree, alignment: Alignment, prior: DirichletPrior) -> float:
    """Log likelihood of the whole alignment, marginalized over stationaries."""
    if alignment.taxa != tree.taxa:
        raise ValueError("alignment and tree are over different taxa")
    if not alignment.columns:
        return 0.0
    root = tree_topology(tree)
    total = 0.0
    first_column = {}
    for index, column in enumerate(alignment.columns):
        if column not in first_column:
            first_column[column] = index
    for pattern, multiplicity in alignment.pattern_index.items():
        value = _log_pattern_likelihood(root, pattern, prior, first_column[pattern])
        total += multiplicity * value
    return total


def log_prior(tree: Tree, prior: GammaPrior) -> float:
    """Summed log gamma density over every leaf and inner edge."""
    total = 0.0
    for length in tree.leaf_lengths:
        total += prior.log_density(length)
    for length in tree.inner.values():
        total += prior.log_density(length)
    return total


def log_posterior(
    tree: Tree,
    alignment: Alignment,
    dirichlet: DirichletPrior,
    gamma: GammaPrior,
) -> float:
    """Unnormalized log posterior density of the tree given the alignment."""
    return log_likelihood(tree, alignment, dirichlet) + log_prior(tree, gamma)
