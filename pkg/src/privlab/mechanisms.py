"""The mechanism model.

A randomized algorithm on n-element datasets over a finite domain X is
represented either explicitly (``TabularMechanism``: one output
distribution per dataset, the object every exact check runs on) or as a
seeded black box (``SampledMechanism``) where tabular enumeration is
infeasible.

Datasets are ordered tuples of domain indices. The enumeration order of
the |X|^n datasets is row-major lexicographic, fixed so tables serialize
reproducibly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, InfeasibleError
from .finite_prob import FiniteDistribution

#: Maximum number of table entries (|X|^n * |Y|) a TabularMechanism may hold.
TABLE_GUARDRAIL = 10**8


def validate_dataset(entries: Sequence[int], domain_size: int) -> tuple[int, ...]:
    """Check an ordered dataset: length >= 1, every index in [0, |X|)."""
    out = tuple(int(e) for e in entries)
    if len(out) < 1:
        raise ValueError("a dataset must contain at least one entry")
    for e in out:
        if not 0 <= e < domain_size:
            raise ValueError(f"entry {e} outside domain of size {domain_size}")
    return out


def dataset_index(entries: Sequence[int], domain_size: int) -> int:
    """Rank of a dataset in the row-major lexicographic order of X^n."""
    idx = 0
    for e in entries:
        idx = idx * domain_size + int(e)
    return idx


def index_dataset(index: int, domain_size: int, sample_size: int) -> tuple[int, ...]:
    """Inverse of :func:`dataset_index`."""
    out = []
    for _ in range(sample_size):
        index, rem = divmod(index, domain_size)
        out.append(rem)
    return tuple(reversed(out))


def all_datasets(domain_size: int, sample_size: int) -> np.ndarray:
    """All datasets as an (|X|^n, n) int array, lexicographic order."""
    grids = np.meshgrid(*([np.arange(domain_size)] * sample_size), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def dataset_indices(datasets: np.ndarray, domain_size: int) -> np.ndarray:
    """Vectorized lexicographic ranks for an (m, n) array of datasets."""
    n = datasets.shape[1]
    weights = domain_size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return datasets @ weights


@dataclass(frozen=True)
class Preprocessor:
    """A domain remap sigma: X -> X together with an index permutation pi of [n].

    Applying the pair to a dataset S yields (sigma(S[pi[0]]), ..., sigma(S[pi[n-1]])).
    """

    sigma: tuple[int, ...]
    pi: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.pi) != list(range(len(self.pi))):
            raise ValueError("pi must be a permutation of [n]")
        for x in self.sigma:
            if not 0 <= x < len(self.sigma):
                raise ValueError("sigma entries must map into the domain")

    @property
    def domain_size(self) -> int:
        return len(self.sigma)

    @property
    def sample_size(self) -> int:
        return len(self.pi)

    @classmethod
    def identity(cls, domain_size: int, sample_size: int) -> "Preprocessor":
        return cls(tuple(range(domain_size)), tuple(range(sample_size)))

    @classmethod
    def random(cls, domain_size: int, sample_size: int, rng: np.random.Generator,
               bijective_sigma: bool = False) -> "Preprocessor":
        if bijective_sigma:
            sigma = tuple(int(x) for x in rng.permutation(domain_size))
        else:
            sigma = tuple(int(x) for x in rng.integers(0, domain_size, size=domain_size))
        pi = tuple(int(x) for x in rng.permutation(sample_size))
        return cls(sigma, pi)

    def apply(self, entries: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.sigma[entries[j]] for j in self.pi)

    def apply_batch(self, datasets: np.ndarray) -> np.ndarray:
        sigma = np.asarray(self.sigma)
        return sigma[datasets[:, list(self.pi)]]

    def compose(self, inner: "Preprocessor") -> "Preprocessor":
        """Single preprocessor equivalent to applying ``self`` at the mechanism
        and then ``inner``: preprocess(preprocess(M, self), inner)
        == preprocess(M, self.compose(inner))."""
        sigma_self = np.asarray(self.sigma)
        sigma_inner = np.asarray(inner.sigma)
        pi_self = np.asarray(self.pi)
        pi_inner = np.asarray(inner.pi)
        sigma = sigma_self[sigma_inner]
        pi = pi_inner[pi_self]
        return Preprocessor(tuple(int(x) for x in sigma), tuple(int(x) for x in pi))


class TabularMechanism:
    """Explicit map from every dataset in X^n to a distribution over Y."""

    __slots__ = ("domain_size", "sample_size", "output_size", "_rows")

    def __init__(self, domain_size: int, sample_size: int, output_size: int,
                 rows: np.ndarray) -> None:
        if domain_size < 1 or sample_size < 1 or output_size < 1:
            raise ValueError("sizes must be positive")
        n_rows = domain_size**sample_size
        if n_rows * output_size > TABLE_GUARDRAIL:
            raise InfeasibleError(
                f"table would hold {n_rows * output_size} entries "
                f"(> {TABLE_GUARDRAIL}); use SampledMechanism instead"
            )
        arr = np.array(rows, dtype=np.float64)
        if arr.shape != (n_rows, output_size):
            raise DimensionError(
                f"rows must have shape {(n_rows, output_size)}, got {arr.shape}"
            )
        if float(arr.min()) < -1e-12:
            raise ValueError("negative probability entry in a row")
        np.clip(arr, 0.0, None, out=arr)
        totals = arr.sum(axis=1)
        if float(totals.min()) <= 0.0:
            raise ValueError("every row must have positive total mass")
        arr /= totals[:, None]
        arr.setflags(write=False)
        self.domain_size = domain_size
        self.sample_size = sample_size
        self.output_size = output_size
        self._rows = arr

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def num_rows(self) -> int:
        return self._rows.shape[0]

    def row(self, entries: Sequence[int]) -> np.ndarray:
        entries = validate_dataset(entries, self.domain_size)
        if len(entries) != self.sample_size:
            raise DimensionError(
                f"dataset length {len(entries)} != sample size {self.sample_size}"
            )
        return self._rows[dataset_index(entries, self.domain_size)]

    def sample(self, entries: Sequence[int], seed: int) -> int:
        rng = np.random.default_rng(seed)
        return int(rng.choice(self.output_size, p=self.row(entries)))

    def to_json(self) -> dict:
        return {
            "domain_size": self.domain_size,
            "sample_size": self.sample_size,
            "output_size": self.output_size,
            "rows": self._rows.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TabularMechanism":
        return cls(obj["domain_size"], obj["sample_size"], obj["output_size"],
                   np.asarray(obj["rows"]))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str) -> "TabularMechanism":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class SampledMechanism:
    """Black-box mechanism: a deterministic function of (dataset, 64-bit seed).

    The sampler must be pure, so the same seed and dataset always give the
    same output and callers may invoke it concurrently.
    """

    domain_size: int
    sample_size: int
    output_size: int
    sampler: Callable[[tuple[int, ...], int], int] = field(repr=False)

    def sample(self, entries: Sequence[int], seed: int) -> int:
        entries = validate_dataset(entries, self.domain_size)
        if len(entries) != self.sample_size:
            raise DimensionError(
                f"dataset length {len(entries)} != sample size {self.sample_size}"
            )
        return int(self.sampler(entries, seed))


Mechanism = TabularMechanism | SampledMechanism


def apply(mechanism: TabularMechanism, entries: Sequence[int]) -> FiniteDistribution:
    """Output distribution of a tabular mechanism on one dataset."""
    return FiniteDistribution(mechanism.row(entries))


def preprocess(mechanism: Mechanism, gamma: Preprocessor) -> Mechanism:
    """The mechanism that reorders its input by pi, remaps it by sigma,
    then runs ``mechanism``."""
    if (gamma.domain_size != mechanism.domain_size
            or gamma.sample_size != mechanism.sample_size):
        raise DimensionError("preprocessor sizes do not match the mechanism")
    if isinstance(mechanism, SampledMechanism):
        base = mechanism.sampler
        return SampledMechanism(
            mechanism.domain_size, mechanism.sample_size, mechanism.output_size,
            lambda entries, seed, _g=gamma: base(_g.apply(entries), seed),
        )
    datasets = all_datasets(mechanism.domain_size, mechanism.sample_size)
    mapped = gamma.apply_batch(datasets)
    rows = mechanism.rows[dataset_indices(mapped, mechanism.domain_size)]
    return TabularMechanism(mechanism.domain_size, mechanism.sample_size,
                            mechanism.output_size, rows)


def symmetrize(mechanism: TabularMechanism) -> TabularMechanism:
    """Uniform mixture over all n! input reorderings; output is invariant
    under permutations of the dataset."""
    n = mechanism.sample_size
    datasets = all_datasets(mechanism.domain_size, n)
    acc = np.zeros_like(mechanism.rows)
    count = 0
    for perm in itertools.permutations(range(n)):
        permuted = datasets[:, list(perm)]
        acc += mechanism.rows[dataset_indices(permuted, mechanism.domain_size)]
        count += 1
    return TabularMechanism(mechanism.domain_size, n, mechanism.output_size,
                            acc / count)


def is_symmetric(mechanism: TabularMechanism, tol: float = 1e-9) -> bool:
    """True iff every row is invariant under reordering the dataset."""
    datasets = all_datasets(mechanism.domain_size, mechanism.sample_size)
    canonical = np.sort(datasets, axis=1)
    canon_rows = mechanism.rows[dataset_indices(canonical, mechanism.domain_size)]
    return bool(np.abs(mechanism.rows - canon_rows).max() <= tol)


def compose_tuple(mechanisms: Sequence[TabularMechanism]) -> TabularMechanism:
    """Non-adaptive composition: on input S, output the tuple of the
    components' independent responses.

    Output index is the mixed-radix encoding of (y_1, ..., y_l), first
    component most significant.
    """
    if not mechanisms:
        raise ValueError("need at least one mechanism")
    first = mechanisms[0]
    for m in mechanisms[1:]:
        if m.domain_size != first.domain_size or m.sample_size != first.sample_size:
            raise DimensionError("composed mechanisms must share X and n")
    out_size = 1
    for m in mechanisms:
        out_size *= m.output_size
    if first.num_rows * out_size > TABLE_GUARDRAIL:
        raise InfeasibleError("composed output space exceeds the table guardrail")
    rows = mechanisms[0].rows
    for m in mechanisms[1:]:
        rows = (rows[:, :, None] * m.rows[:, None, :]).reshape(rows.shape[0], -1)
    return TabularMechanism(first.domain_size, first.sample_size, out_size, rows)


def compose_output_index(indices: Sequence[int], output_sizes: Sequence[int]) -> int:
    """Encode a tuple of component outputs into the composed output index."""
    idx = 0
    for y, size in zip(indices, output_sizes):
        idx = idx * size + int(y)
    return idx


def subsample(mechanism: TabularMechanism, m: int) -> TabularMechanism:
    """Run the base mechanism on n of the m inputs, drawn without
    replacement in uniform random order.

    The row for an m-dataset is the average of the base rows over all
    ordered n-arrangements of its positions; under i.i.d. inputs the
    output law matches the base mechanism's.
    """
    n = mechanism.sample_size
    if m < n:
        raise ValueError(f"m={m} must be at least the base sample size n={n}")
    n_rows = mechanism.domain_size**m
    if n_rows * mechanism.output_size > TABLE_GUARDRAIL:
        raise InfeasibleError("subsampled table exceeds the guardrail")
    datasets = all_datasets(mechanism.domain_size, m)
    acc = np.zeros((n_rows, mechanism.output_size))
    count = 0
    for positions in itertools.permutations(range(m), n):
        sub = datasets[:, list(positions)]
        acc += mechanism.rows[dataset_indices(sub, mechanism.domain_size)]
        count += 1
    return TabularMechanism(mechanism.domain_size, m, mechanism.output_size,
                            acc / count)


def postprocess_relabel(mechanism: TabularMechanism,
                        perm: Sequence[int]) -> TabularMechanism:
    """Relabel outputs by a bijection of Y."""
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(mechanism.output_size)):
        raise ValueError("perm must be a bijection of the output space")
    rows = np.empty_like(mechanism.rows)
    rows[:, list(perm)] = mechanism.rows
    return TabularMechanism(mechanism.domain_size, mechanism.sample_size,
                            mechanism.output_size, rows)


# ---------------------------------------------------------------------------
# Stock mechanisms

def constant_mechanism(domain_size: int, sample_size: int,
                       dist: FiniteDistribution) -> TabularMechanism:
    """Same output distribution on every dataset."""
    rows = np.tile(dist.probs, (domain_size**sample_size, 1))
    return TabularMechanism(domain_size, sample_size, dist.support_size, rows)


def identity_mechanism(domain_size: int, sample_size: int) -> TabularMechanism:
    """Point mass on the input dataset; Y = X^n."""
    n_rows = domain_size**sample_size
    rows = np.eye(n_rows)
    return TabularMechanism(domain_size, sample_size, n_rows, rows)


def first_k_mechanism(domain_size: int, sample_size: int, k: int) -> TabularMechanism:
    """Outputs the first k coordinates of its dataset; Y = X^k."""
    if not 1 <= k <= sample_size:
        raise ValueError("k must lie in [1, n]")
    datasets = all_datasets(domain_size, sample_size)
    out_idx = dataset_indices(datasets[:, :k], domain_size)
    rows = np.zeros((datasets.shape[0], domain_size**k))
    rows[np.arange(datasets.shape[0]), out_idx] = 1.0
    return TabularMechanism(domain_size, sample_size, domain_size**k, rows)


def coordinate_mechanism(domain_size: int, sample_size: int, coord: int) -> TabularMechanism:
    """Outputs the single coordinate ``coord`` of its dataset; Y = X."""
    datasets = all_datasets(domain_size, sample_size)
    rows = np.zeros((datasets.shape[0], domain_size))
    rows[np.arange(datasets.shape[0]), datasets[:, coord]] = 1.0
    return TabularMechanism(domain_size, sample_size, domain_size, rows)


def randomized_response_mechanism(domain_size: int, epsilon: float,
                                  sample_size: int = 1) -> TabularMechanism:
    """Per-coordinate randomized response at privacy level ``epsilon``.

    Each coordinate is reported truthfully with probability
    e^eps / (e^eps + |X| - 1), else replaced by a uniform other element;
    the output is the tuple of reports (Y = X^n). The per-coordinate
    likelihood ratio is exactly e^eps, so the mechanism is (eps, 0)-DP
    under single-coordinate replacement.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    keep = np.exp(epsilon) / (np.exp(epsilon) + domain_size - 1)
    other = (1.0 - keep) / (domain_size - 1) if domain_size > 1 else 0.0
    single = np.full((domain_size, domain_size), other)
    np.fill_diagonal(single, keep)
    rows = None
    datasets = all_datasets(domain_size, sample_size)
    for c in range(sample_size):
        contrib = single[datasets[:, c]]
        rows = contrib if rows is None else (
            rows[:, :, None] * contrib[:, None, :]
        ).reshape(datasets.shape[0], -1)
    return TabularMechanism(domain_size, sample_size, domain_size**sample_size, rows)


def random_mechanism(domain_size: int, sample_size: int, output_size: int,
                     rng: np.random.Generator, concentration: float = 1.0) -> TabularMechanism:
    """Rows drawn independently from a symmetric Dirichlet."""
    rows = rng.dirichlet(np.full(output_size, concentration),
                         size=domain_size**sample_size)
    return TabularMechanism(domain_size, sample_size, output_size, rows)
