"""Shared domain types: sensor vectors, policies, the outcome/policy repertoire.

Sensor vectors and policies are plain 1-D float64 numpy arrays.  A
:class:`Repertoire` stores them row-wise in growable matrices so that
nearest-neighbour queries over thousands of 7500-D images stay cheap.

Distances are always plain Euclidean, computed as ``sqrt(sum((a - b) ** 2))``.
Bulk queries screen candidates with a BLAS dot-product expansion and then
re-rank the survivors with the exact formula, so every returned distance is
bit-identical to :func:`euclidean_distance` on the same pair.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

# Relative slack on squared distances when screening with the expanded form
# |x|^2 + |q|^2 - 2 x.q.  Rounding error of that form is ~D * 1e-16 relative,
# so 1e-9 is safe for any D below ~1e6.
_SCREEN_RTOL = 1e-9


class DimensionError(ValueError):
    """Vector lengths disagree with each other or with a declared dimension."""


class EmptyRepertoireError(LookupError):
    """A query needs at least one stored outcome."""


class InsufficientDataError(ValueError):
    """An operation needs more stored points than are available."""


def as_vector(values, dim: int | None = None, name: str = "vector") -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionError(f"{name} has length {vec.shape[0]}, expected {dim}")
    return vec


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def exact_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise :func:`euclidean_distance` from ``q`` to each row of ``points``."""
    return np.sqrt(np.sum((points - q) ** 2, axis=1))


def exact_distances_dedup(points: np.ndarray, q: np.ndarray, rows: np.ndarray,
                          canon: np.ndarray | None = None) -> np.ndarray:
    """:func:`exact_distances` for ``points[rows]``.

    ``canon[i]`` is the first row holding an outcome identical to row ``i``;
    with it each distinct outcome is measured only once.
    """
    if canon is None or rows.size < 2:
        return exact_distances(points[rows], q)
    reps, inverse = np.unique(canon[rows], return_inverse=True)
    return exact_distances(points[reps], q)[inverse]


def approx_sq_distances(points: np.ndarray, sqnorms: np.ndarray, q: np.ndarray) -> np.ndarray:
    qq = float(q @ q)
    return sqnorms - 2.0 * (points @ q) + qq


def screen_tolerance(sqnorms: np.ndarray, q: np.ndarray) -> float:
    if sqnorms.size == 0:
        return 0.0
    return _SCREEN_RTOL * (float(sqnorms.max()) + float(q @ q)) + 1e-300


def k_smallest(
    points: np.ndarray,
    q: np.ndarray,
    k: int,
    *,
    sqnorms: np.ndarray | None = None,
    approx: np.ndarray | None = None,
    exclude: int | None = None,
    canon: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Indices and exact distances of the ``k`` rows nearest to ``q``.

    Ordered by (distance, index), so exact ties go to the lowest index.
    ``exclude`` drops one row (used for self-exclusion in k-NN graphs).
    """
    n = points.shape[0]
    m = min(k, n - (exclude is not None))
    if m <= 0:
        return np.empty(0, dtype=np.intp), np.empty(0)
    if sqnorms is None:
        sqnorms = np.einsum("ij,ij->i", points, points)
    if approx is None:
        approx = approx_sq_distances(points, sqnorms, q)
    else:
        approx = approx.copy()
    if exclude is not None:
        approx[exclude] = np.inf
    tol = screen_tolerance(sqnorms, q)
    kth = np.partition(approx, m - 1)[m - 1]
    cand = np.flatnonzero(approx <= kth + 2.0 * tol)
    if exclude is not None:
        cand = cand[cand != exclude]
    d = exact_distances_dedup(points, q, cand, canon)
    order = np.lexsort((cand, d))[:m]
    return cand[order], d[order]


class Repertoire:
    """Ordered store of achieved outcomes and the policies that produced them.

    Row ``i`` of :attr:`outcomes` pairs with row ``i`` of :attr:`policies`.
    An optional ground-truth state is kept per row for coverage metrics; it is
    never used by the learners.
    """

    def __init__(self, outcome_dim: int, policy_dim: int, state_dim: int | None = None,
                 capacity: int = 64):
        self.outcome_dim = int(outcome_dim)
        self.policy_dim = int(policy_dim)
        self.state_dim = None if state_dim is None else int(state_dim)
        capacity = max(1, int(capacity))
        self._n = 0
        self._outcomes = np.empty((capacity, self.outcome_dim))
        self._policies = np.empty((capacity, self.policy_dim))
        self._sqnorms = np.empty(capacity)
        self._canon = np.empty(capacity, dtype=np.intp)
        self._first_seen: dict[bytes, list[int]] = {}
        self._states = None if state_dim is None else np.empty((capacity, self.state_dim))

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        if not -self._n <= i < self._n:
            raise IndexError(i)
        return self._outcomes[i % self._n].copy(), self._policies[i % self._n].copy()

    def __iter__(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for i in range(self._n):
            yield self[i]

    @property
    def outcomes(self) -> np.ndarray:
        view = self._outcomes[: self._n]
        view.flags.writeable = False
        return view

    @property
    def policies(self) -> np.ndarray:
        view = self._policies[: self._n]
        view.flags.writeable = False
        return view

    @property
    def sqnorms(self) -> np.ndarray:
        return self._sqnorms[: self._n]

    @property
    def canon(self) -> np.ndarray:
        """Row index of the first stored copy of each row's outcome."""
        return self._canon[: self._n]

    @property
    def states(self) -> np.ndarray | None:
        if self._states is None:
            return None
        return self._states[: self._n]

    def _grow(self) -> None:
        cap = 2 * self._outcomes.shape[0]
        # Re-allocate rather than resize so live views stay valid.
        for name in ("_outcomes", "_policies", "_sqnorms", "_canon", "_states"):
            old = getattr(self, name)
            if old is None:
                continue
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def add(self, outcome, policy, state=None) -> "Repertoire":
        o = as_vector(outcome, self.outcome_dim, "outcome")
        p = as_vector(policy, self.policy_dim, "policy")
        if self._states is not None:
            if state is None:
                raise DimensionError("this repertoire records a state per outcome")
            s = as_vector(state, self.state_dim, "state")
        if self._n == self._outcomes.shape[0]:
            self._grow()
        i = self._n
        self._outcomes[i] = o
        self._policies[i] = p
        self._sqnorms[i] = o @ o
        self._canon[i] = self._find_copy(o, i)
        if self._states is not None:
            self._states[i] = s
        self._n += 1
        return self

    def _find_copy(self, o: np.ndarray, i: int) -> int:
        key = hashlib.blake2b(o.tobytes(), digest_size=16).digest()
        bucket = self._first_seen.setdefault(key, [])
        for j in bucket:
            if np.array_equal(self._outcomes[j], o):
                return j
        bucket.append(i)
        return i

    def nearest(self, q) -> int:
        if self._n == 0:
            raise EmptyRepertoireError("repertoire is empty")
        q = as_vector(q, self.outcome_dim, "query")
        idx, _ = k_smallest(self.outcomes, q, 1, sqnorms=self.sqnorms, canon=self.canon)
        return int(idx[0])

    def nearest_many(self, queries) -> np.ndarray:
        """:meth:`nearest` for each row of ``queries``, batched through one GEMM."""
        if self._n == 0:
            raise EmptyRepertoireError("repertoire is empty")
        Q = np.asarray(queries, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[1] != self.outcome_dim:
            raise DimensionError(f"queries must have shape (m, {self.outcome_dim})")
        X, sq = self.outcomes, self.sqnorms
        approx = sq[None, :] - 2.0 * (Q @ X.T) + np.einsum("ij,ij->i", Q, Q)[:, None]
        out = np.empty(Q.shape[0], dtype=np.intp)
        for j, q in enumerate(Q):
            idx, _ = k_smallest(X, q, 1, sqnorms=sq, approx=approx[j], canon=self.canon)
            out[j] = idx[0]
        return out

    def k_nearest(self, q, k: int) -> tuple[np.ndarray, np.ndarray]:
        if self._n == 0:
            raise EmptyRepertoireError("repertoire is empty")
        q = as_vector(q, self.outcome_dim, "query")
        return k_smallest(self.outcomes, q, k, sqnorms=self.sqnorms, canon=self.canon)

    def copy(self) -> "Repertoire":
        other = Repertoire(self.outcome_dim, self.policy_dim, self.state_dim,
                           capacity=max(self._n, 1))
        for i in range(self._n):
            other.add(self._outcomes[i], self._policies[i],
                      None if self._states is None else self._states[i])
        return other

    def equals(self, other: "Repertoire") -> bool:
        """Bit-for-bit equality of outcomes and policies."""
        return (len(self) == len(other)
                and np.array_equal(self.outcomes, other.outcomes)
                and np.array_equal(self.policies, other.policies))

    def write_csv(self, path: str | Path) -> None:
        write_repertoire_csv(path, self.outcomes, self.policies)


def repertoire_add(r: Repertoire, outcome, policy, state=None) -> Repertoire:
    return r.add(outcome, policy, state)


def repertoire_nearest(r: Repertoire, q) -> int:
    return r.nearest(q)


# Dump format: header ``index,o0..o{D-1},p0..p{P-1}``; floats written with
# repr() so that reading them back is bit-exact.

def write_repertoire_csv(path: str | Path, outcomes: np.ndarray, policies: np.ndarray) -> None:
    n, d = outcomes.shape
    p = policies.shape[1]
    header = ["index"] + [f"o{j}" for j in range(d)] + [f"p{j}" for j in range(p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([i] + [repr(float(v)) for v in outcomes[i]]
                       + [repr(float(v)) for v in policies[i]])


class DumpParseError(ValueError):
    """An outcomes dump is malformed."""


def read_repertoire_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(outcomes, policies)`` from a dump written by :func:`write_repertoire_csv`."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DumpParseError(f"cannot read dump {path}: {exc}") from exc
    if not rows or not rows[0] or rows[0][0] != "index":
        raise DumpParseError(f"{path}: missing 'index' header")
    header = rows[0]
    d = sum(1 for h in header if h.startswith("o"))
    p = sum(1 for h in header if h.startswith("p"))
    if d + p + 1 != len(header) or d == 0 or p == 0:
        raise DumpParseError(f"{path}: header must be index,o*,p*")
    outcomes = np.empty((len(rows) - 1, d))
    policies = np.empty((len(rows) - 1, p))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise DumpParseError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        try:
            if int(row[0]) != i:
                raise DumpParseError(f"{path}: row {i} has index {row[0]}")
            outcomes[i] = [float(v) for v in row[1: 1 + d]]
            policies[i] = [float(v) for v in row[1 + d:]]
        except ValueError as exc:
            if isinstance(exc, DumpParseError):
                raise
            raise DumpParseError(f"{path}: row {i}: {exc}") from exc
    return outcomes, policies


def stack_vectors(vectors: Sequence) -> np.ndarray:
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError(f"expected a sequence of equal-length vectors, got shape {X.shape}")
    return X


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent PCG64 stream ``stream`` derived from ``seed``.

    Training uses stream 0 and evaluation stream 1, so evaluation draws can
    never shift the training sequence.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))
