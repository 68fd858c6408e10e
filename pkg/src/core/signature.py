"""
Signatures of braid closures.

Two independent routes: the Goeritz form of the checkerboard-coloured closed
braid diagram (used by the signature quasimorphism) and the Seifert matrix of
the braided Seifert surface (kept as a cross-check). Positive braids get
negative signatures, so the trefoil s1^3 has signature -2.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

from core.braids import BraidWord, free_reduce
from core.errors import DiagramDegenerate

EIGEN_TOLERANCE = 1e-9


def matrix_signature(m: np.ndarray) -> int:
    """Positive minus negative eigenvalues of a symmetric matrix"""
    if m.size == 0:
        return 0
    eig = np.linalg.eigvalsh(m)
    tol = EIGEN_TOLERANCE * max(1.0, float(np.max(np.abs(eig))))
    return int(np.sum(eig > tol) - np.sum(eig < -tol))


def split_blocks(letters: Sequence[Tuple[int, int]]) -> List[List[Tuple[int, int]]]:
    """
    Split a word into sub-words over runs of consecutive generator indices.
    Strands separated by an unused generator never interact, so the closure is a split union.
    """
    used = sorted({i for i, _ in letters})
    blocks: List[List[int]] = []
    for i in used:
        if blocks and blocks[-1][-1] == i - 1:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    out = []
    for block in blocks:
        lo, members = block[0], set(block)
        out.append([(i - lo + 1, s) for i, s in letters if i in members])
    return out


def _region_of(positions: List[int], q: int) -> int:
    """Index of the band segment containing word position q; segment t follows crossing t"""
    before = sum(1 for p in positions if p < q)
    return (before - 1) % len(positions)


def goeritz_matrix(strands: int, letters: Sequence[Tuple[int, int]]) -> Tuple[np.ndarray, int]:
    """
    Reduced Goeritz matrix and the correction term of a closed braid diagram whose
    generators 1..strands-1 all occur. Bands 0..strands lie between consecutive
    strands (band 0 inside, band `strands` outside); even bands are white.
    """
    positions: Dict[int, List[int]] = {}
    for q, (i, _) in enumerate(letters):
        positions.setdefault(i, []).append(q)

    index: Dict[Tuple[int, int], int] = {}

    def node(key: Tuple[int, int]) -> int:
        if key not in index:
            index[key] = len(index)
        return index[key]

    def region(band: int, q: int) -> int:
        if band == 0 or band == strands:
            return node((band, 0))
        return node((band, _region_of(positions[band], q)))

    node((0, 0))
    edges = []
    correction = 0
    for q, (k, eps) in enumerate(letters):
        if k % 2 == 0:
            t = positions[k].index(q)
            count = len(positions[k])
            u, v, eta = node((k, (t - 1) % count)), node((k, t)), -eps
        else:
            u, v, eta = region(k - 1, q), region(k + 1, q), eps
        edges.append((u, v, eta))
        if eta == eps:
            correction += eta

    size = len(index)
    g = np.zeros((size, size))
    for u, v, eta in edges:
        if u != v:
            g[u, v] += eta
            g[v, u] += eta
    g[np.diag_indices(size)] = -g.sum(axis=0)
    if size < 1:
        raise DiagramDegenerate("Closed braid diagram has no white regions")
    return g[1:, 1:], correction


def goeritz_signature(w: BraidWord) -> int:
    """Closure signature via the Goeritz form with the standard correction term"""
    total = 0
    for block in split_blocks(free_reduce(w.letters)):
        strands = max(i for i, _ in block) + 1
        g, correction = goeritz_matrix(strands, block)
        total += -(matrix_signature(g) + correction)
    return total


def seifert_matrix(letters: Sequence[Tuple[int, int]]) -> np.ndarray:
    """Seifert matrix of the braided surface of a connected block, in signed-index form"""
    x = [i * s for i, s in letters]
    length = len(x)
    h = []
    for j in range(length - 1):
        a = abs(x[j])
        h.append(next((k for k in range(j + 1, length) if abs(x[k]) == a), 0))
    size = len(h)
    A = np.zeros((size, size))
    indices = [i for i, hi in enumerate(h) if hi]
    for i in indices:
        hi = h[i]
        for j in range(i, size):
            if i == j:
                A[i, j] = -np.sign(x[i] + x[hi])
            elif hi > h[j] or hi < j:
                continue
            elif hi == j:
                if x[j] > 0:
                    A[i, j] = 1
                else:
                    A[j, i] = -1
            elif abs(x[i]) - abs(x[j]) == 1:
                A[j, i] = -1
            elif abs(x[j]) - abs(x[i]) == 1:
                A[i, j] = 1
    return A[np.ix_(indices, indices)]


def seifert_signature(w: BraidWord) -> int:
    """Closure signature from the symmetrized Seifert matrix"""
    total = 0
    for block in split_blocks(free_reduce(w.letters)):
        A = seifert_matrix(block)
        total += matrix_signature(A + A.T)
    return total
