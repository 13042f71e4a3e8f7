"""Linear code definitions: alist ingestion, generator derivation,
encoding and syndrome computation.

The repository ships the CCSDS (128,64) telecommand LDPC parity-check
matrix as packaged alist data; any other code can be supplied as an
alist file on the command line.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .gf2 import BitMatrix, BitVector, RankDeficiencyError, mat_vec, to_systematic


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """An (n, k) binary linear code with cached generator matrix."""

    n: int
    k: int
    h: BitMatrix
    g: BitMatrix

    @property
    def m(self) -> int:
        return self.n - self.k


def parse_alist(text: str) -> BitMatrix:
    """Parse alist text into an (n-k) x n parity-check matrix.

    Format: first line "n m", second line "max_dv max_dc", then the n
    variable degrees, the m check degrees, n adjacency lines of check
    indices and m adjacency lines of variable indices (all 1-indexed,
    zero entries are padding). Both adjacency halves are required and
    must describe the same matrix.
    """
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 4:
        raise ValueError("alist: truncated header")
    try:
        n, m = (int(v) for v in lines[0])
        max_dv, max_dc = (int(v) for v in lines[1])
        var_deg = [int(v) for v in lines[2]]
        chk_deg = [int(v) for v in lines[3]]
    except (TypeError, ValueError) as exc:
        raise ValueError(f"alist: malformed header: {exc}") from None
    if n <= 0 or m <= 0:
        raise ValueError(f"alist: bad dimensions n={n} m={m}")
    if len(var_deg) != n or len(chk_deg) != m:
        raise ValueError("alist: degree list length does not match dimensions")
    if len(lines) != 4 + n + m:
        raise ValueError(f"alist: expected {4 + n + m} lines, got {len(lines)}")
    if max(var_deg) > max_dv or max(chk_deg) > max_dc:
        raise ValueError("alist: declared maximum degree exceeded")

    h = np.zeros((m, n), dtype=np.uint8)
    for v in range(n):
        entries = [int(s) for s in lines[4 + v] if s != "0"]
        if len(entries) != var_deg[v]:
            raise ValueError(f"alist: variable {v + 1} lists {len(entries)} checks, declared {var_deg[v]}")
        for c in entries:
            if not 1 <= c <= m:
                raise ValueError(f"alist: check index {c} out of range 1..{m}")
            h[c - 1, v] = 1
    for c in range(m):
        entries = sorted(int(s) for s in lines[4 + n + c] if s != "0")
        if len(entries) != chk_deg[c]:
            raise ValueError(f"alist: check {c + 1} lists {len(entries)} variables, declared {chk_deg[c]}")
        for v in entries:
            if not 1 <= v <= n:
                raise ValueError(f"alist: variable index {v} out of range 1..{n}")
        expected = (np.flatnonzero(h[c]) + 1).tolist()
        if entries != expected:
            raise ValueError(f"alist: row {c + 1} adjacency disagrees with the column lists")
    return BitMatrix(h)


def write_alist(h: BitMatrix) -> str:
    """Serialize a parity-check matrix in alist format."""
    a = h.data
    m, n = a.shape
    var_deg = a.sum(axis=0)
    chk_deg = a.sum(axis=1)
    out = [f"{n} {m}", f"{int(var_deg.max())} {int(chk_deg.max())}"]
    out.append(" ".join(str(int(d)) for d in var_deg))
    out.append(" ".join(str(int(d)) for d in chk_deg))
    for v in range(n):
        out.append(" ".join(str(int(c) + 1) for c in np.flatnonzero(a[:, v])))
    for c in range(m):
        out.append(" ".join(str(int(v) + 1) for v in np.flatnonzero(a[c])))
    return "\n".join(out) + "\n"


def derive_generator(h: BitMatrix) -> BitMatrix:
    """Build a k x n generator with G H^T = 0 from a full-row-rank H.

    H is brought to [I : Q2] under a column permutation; the dual
    systematic form [Q2^T : I] is then mapped back to the original
    column order.
    """
    sys_form = to_systematic(h)
    m, n = h.rows, h.cols
    k = n - m
    g_perm = np.concatenate([sys_form.q2.data.T, np.eye(k, dtype=np.uint8)], axis=1)
    g = np.empty_like(g_perm)
    g[:, sys_form.pi2.map] = g_perm
    if ((g @ h.data.T) & 1).any():
        raise AssertionError("generator does not annihilate H")
    return BitMatrix(g)


def encode(msg: BitVector, code: CodeSpec) -> BitVector:
    """c = m G over GF(2)."""
    if msg.n != code.k:
        raise ValueError(f"message length {msg.n} != k={code.k}")
    return BitVector((msg.bits @ code.g.data) & 1)


def syndrome(h: BitMatrix, v: BitVector) -> BitVector:
    """H v^T; zero iff v is a codeword."""
    return mat_vec(h, v)


def code_from_h(h: BitMatrix) -> CodeSpec:
    """Wrap a parity-check matrix into a CodeSpec, deriving the generator.

    Matrices without full row rank are rejected here rather than being
    silently reduced.
    """
    try:
        g = derive_generator(h)
    except RankDeficiencyError:
        raise RankDeficiencyError(
            f"parity-check matrix ({h.rows}x{h.cols}) is rank deficient; redundant rows are not accepted"
        ) from None
    return CodeSpec(n=h.cols, k=h.cols - h.rows, h=h, g=g)


def load_code(path) -> CodeSpec:
    """Load a code from an alist file."""
    with open(path, "rt", encoding="ascii") as f:
        return code_from_h(parse_alist(f.read()))


def ccsds_128_64() -> CodeSpec:
    """The packaged CCSDS (128,64) telecommand LDPC code."""
    text = resources.files("nds").joinpath("data/ccsds_128_64.alist").read_text(encoding="ascii")
    return code_from_h(parse_alist(text))


def hamming_7_4() -> CodeSpec:
    """The (7,4) Hamming code with column i of H equal to binary i+1.

    Small enough for exhaustive-codebook oracles in tests and the
    built-in verification suite.
    """
    h = np.array([[(i >> b) & 1 for i in range(1, 8)] for b in (2, 1, 0)], dtype=np.uint8)
    return code_from_h(BitMatrix(h))
