#!/usr/bin/env python3
"""Regenerate src/nds/data/ccsds_128_64.alist from the CCSDS circulant
definition.

The (n=128, k=64) telecommand LDPC code (CCSDS 231.0-B) is specified as
a 4x8 array of 16x16 circulants. PHI**j denotes the identity matrix
with rows cyclically shifted right by j and 0 the all-zero block;
entries written as a pair add two circulants mod 2.
"""

import hashlib
import pathlib
import sys

import numpy as np

M = 16

# 4x8 block layout; each entry is a list of shift exponents to add,
# None for the all-zero block and "I" shorthand for shift 0.
LAYOUT = [
    [[0, 7], [2], [14], [6], None, [0], [13], [0]],
    [[6], [0, 15], [0], [1], [0], None, [0], [7]],
    [[4], [1], [0, 15], [14], [11], [0], None, [3]],
    [[0], [1], [9], [0, 13], [14], [1], [0], None],
]
# Blocks that are the plain identity rather than PHI**0 are the same
# matrix, so the table above only stores exponents.


def circulant(shift: int) -> np.ndarray:
    out = np.zeros((M, M), dtype=np.uint8)
    for i in range(M):
        out[i, (i + shift) % M] = 1
    return out


def build_h() -> np.ndarray:
    rows = []
    for brow in LAYOUT:
        blocks = []
        for entry in brow:
            if entry is None:
                blocks.append(np.zeros((M, M), dtype=np.uint8))
            else:
                b = np.zeros((M, M), dtype=np.uint8)
                for s in entry:
                    b ^= circulant(s)
                blocks.append(b)
        rows.append(np.concatenate(blocks, axis=1))
    return np.concatenate(rows, axis=0)


def main() -> int:
    sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))
    from nds.code import write_alist, code_from_h
    from nds.gf2 import BitMatrix

    h = build_h()
    assert h.shape == (64, 128)
    assert (h.sum(axis=1) == 8).all(), "every check row must have weight 8"
    assert sorted(set(h.sum(axis=0).tolist())) == [3, 5], "column weights must be 3 or 5"
    code = code_from_h(BitMatrix(h))  # raises if rank < 64
    assert code.k == 64

    text = write_alist(code.h)
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "nds" / "data" / "ccsds_128_64.alist"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="ascii")
    digest = hashlib.sha256(text.encode("ascii")).hexdigest()
    print(f"wrote {out} ({len(text)} bytes)")
    print(f"sha256 {digest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
