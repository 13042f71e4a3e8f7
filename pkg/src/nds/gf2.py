"""GF(2) vectors, matrices, permutations and the column-swapping
Gaussian elimination that produces the systematic form used by
ordered-statistics reprocessing.

All values are immutable after construction, so they can be shared
freely between frame workers. The internal storage is one byte per bit;
callers only ever see 0/1 sequences.
"""

from __future__ import annotations

import numpy as np


class RankDeficiencyError(ValueError):
    """Raised when a parity-check matrix does not have full row rank."""


def _as_bits(seq) -> np.ndarray:
    a = np.asarray(seq, dtype=np.uint8)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-D bit sequence, got shape {a.shape}")
    if a.size and a.max() > 1:
        raise ValueError("bit values must be 0 or 1")
    return a


class BitVector:
    """Fixed-length vector over GF(2)."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        b = _as_bits(bits).copy()
        b.flags.writeable = False
        self.bits = b

    @property
    def n(self) -> int:
        return self.bits.size

    def __len__(self) -> int:
        return self.bits.size

    def __getitem__(self, i):
        return int(self.bits[i])

    def __xor__(self, other: "BitVector") -> "BitVector":
        return xor_vec(self, other)

    def __and__(self, other: "BitVector") -> "BitVector":
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")
        return BitVector(self.bits & other.bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, BitVector) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def weight(self) -> int:
        return int(self.bits.sum())

    def is_zero(self) -> bool:
        return not self.bits.any()

    def __repr__(self) -> str:
        s = "".join(map(str, self.bits[:40]))
        tail = "..." if self.n > 40 else ""
        return f"BitVector({s}{tail}, n={self.n})"

    @staticmethod
    def zeros(n: int) -> "BitVector":
        return BitVector(np.zeros(n, dtype=np.uint8))


class BitMatrix:
    """Dense matrix over GF(2), stored row-major."""

    __slots__ = ("data",)

    def __init__(self, rows):
        a = np.asarray(rows, dtype=np.uint8)
        if a.ndim != 2:
            raise ValueError(f"expected a 2-D bit array, got shape {a.shape}")
        if a.size and a.max() > 1:
            raise ValueError("bit values must be 0 or 1")
        a = a.copy()
        a.flags.writeable = False
        self.data = a

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def row(self, i: int) -> BitVector:
        return BitVector(self.data[i])

    def transpose(self) -> "BitMatrix":
        return BitMatrix(self.data.T)

    def permute_cols(self, perm: "Permutation") -> "BitMatrix":
        return BitMatrix(self.data[:, perm.map])

    def __eq__(self, other) -> bool:
        return isinstance(other, BitMatrix) and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.data.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"

    @staticmethod
    def identity(n: int) -> "BitMatrix":
        return BitMatrix(np.eye(n, dtype=np.uint8))

    @staticmethod
    def zeros(rows: int, cols: int) -> "BitMatrix":
        return BitMatrix(np.zeros((rows, cols), dtype=np.uint8))

    @staticmethod
    def hstack(left: "BitMatrix", right: "BitMatrix") -> "BitMatrix":
        if left.rows != right.rows:
            raise ValueError("row count mismatch")
        return BitMatrix(np.concatenate([left.data, right.data], axis=1))


class Permutation:
    """Bijection on {0..n-1}; ``apply`` gathers, i.e. out[i] = x[map[i]]."""

    __slots__ = ("map",)

    def __init__(self, mapping):
        m = np.asarray(mapping, dtype=np.int64).copy()
        if m.ndim != 1:
            raise ValueError("permutation map must be 1-D")
        if not np.array_equal(np.sort(m), np.arange(m.size)):
            raise ValueError("not a bijection on {0..n-1}")
        m.flags.writeable = False
        self.map = m

    @property
    def n(self) -> int:
        return self.map.size

    def apply(self, x):
        """Permute a sequence (ndarray or BitVector) into this order."""
        if isinstance(x, BitVector):
            return BitVector(x.bits[self.map])
        a = np.asarray(x)
        if a.shape[-1] != self.n:
            raise ValueError(f"length mismatch: {a.shape[-1]} vs {self.n}")
        return a[..., self.map]

    def inverse(self) -> "Permutation":
        inv = np.empty(self.n, dtype=np.int64)
        inv[self.map] = np.arange(self.n)
        return Permutation(inv)

    def compose(self, inner: "Permutation") -> "Permutation":
        """Permutation equivalent to applying ``inner`` first, then ``self``."""
        return Permutation(inner.map[self.map])

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.map, np.arange(self.n)))

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.map, other.map)

    def __repr__(self) -> str:
        return f"Permutation({self.map.tolist()})" if self.n <= 16 else f"Permutation(n={self.n})"

    @staticmethod
    def identity(n: int) -> "Permutation":
        return Permutation(np.arange(n))


class SystematicForm:
    """Result of reducing a full-row-rank matrix to [I : Q2].

    ``pi2`` is the column permutation such that row-reducing the
    column-permuted input yields the identity block followed by ``q2``.
    """

    __slots__ = ("q2", "pi2")

    def __init__(self, q2: BitMatrix, pi2: Permutation):
        self.q2 = q2
        self.pi2 = pi2


def xor_vec(a: BitVector, b: BitVector) -> BitVector:
    """Elementwise mod-2 sum."""
    if a.n != b.n:
        raise ValueError(f"length mismatch: {a.n} vs {b.n}")
    return BitVector(a.bits ^ b.bits)


def mat_vec(m: BitMatrix, v: BitVector) -> BitVector:
    """Mod-2 matrix-vector product M v."""
    if m.cols != v.n:
        raise ValueError(f"dimension mismatch: {m.rows}x{m.cols} with vector of length {v.n}")
    # uint8 matmul wraps mod 256, which preserves parity.
    return BitVector((m.data @ v.bits) & 1)


def to_systematic(h: BitMatrix) -> SystematicForm:
    """Reduce a full-row-rank (n-k) x n matrix to [I : Q2].

    Columns are scanned left to right. When the current column has no
    usable pivot it is swapped with the nearest later column that does,
    so the reliability order of the untouched columns is disturbed as
    little as possible. The resulting column permutation is returned
    alongside Q2; it is the identity whenever the leading n-k columns
    are already linearly independent.
    """
    a = h.data.copy()
    m, n = a.shape
    if m > n:
        raise RankDeficiencyError(f"more rows ({m}) than columns ({n})")
    perm = np.arange(n)
    for i in range(m):
        col = i
        while col < n and not a[i:, col].any():
            col += 1
        if col == n:
            raise RankDeficiencyError(f"rank < {m}: no pivot available for row {i}")
        if col != i:
            a[:, [i, col]] = a[:, [col, i]]
            perm[[i, col]] = perm[[col, i]]
        r = i + int(np.argmax(a[i:, i]))
        if r != i:
            a[[i, r]] = a[[r, i]]
        others = np.flatnonzero(a[:, i])
        others = others[others != i]
        if others.size:
            a[others] ^= a[i]
    return SystematicForm(BitMatrix(a[:, m:]), Permutation(perm))
