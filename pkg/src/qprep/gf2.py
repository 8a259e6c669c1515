"""GF(2) linear algebra and lossless compression of determinant bitstrings.

D distinct occupation bitstrings of length 2N are mapped to mutually
distinct signatures of 2*ceil(log2 D) - 1 bits in two stages: first every
string is restricted to a row basis of the (2N x D) position-by-string bit
matrix (substring selection), then signature vectors u_k are constructed
whose GF(2) dot products with the substrings give the signature bits.  The
signature-vector search peels one dimension per step, each step scanning at
most D**2/2 + D + 1 candidates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BitMatrix",
    "DuplicateDeterminant",
    "SignatureMap",
    "rank_and_row_basis",
    "select_substrings",
    "find_signature_vectors",
    "compress",
    "signature_length",
]


class DuplicateDeterminant(ValueError):
    """The input bitstrings were expected to be pairwise distinct but are not."""


def signature_length(n_det):
    """Number of signature bits, 2*ceil(log2 D) - 1, for D >= 2 (0 for D=1)."""
    if n_det < 1:
        raise ValueError("need at least one determinant")
    if n_det == 1:
        return 0
    return 2 * math.ceil(math.log2(n_det)) - 1


class BitMatrix:
    """Dense GF(2) matrix; entries stored row-major as a uint8 array."""

    def __init__(self, bits):
        bits = np.ascontiguousarray(np.asarray(bits, dtype=np.uint8) & 1)
        if bits.ndim != 2:
            raise ValueError("expected a 2-d array of bits")
        self.bits = bits

    @classmethod
    def from_strings(cls, rows):
        """Build from an iterable of equal-length '0'/'1' strings."""
        return cls([[int(c) for c in row] for row in rows])

    @property
    def rows(self):
        return self.bits.shape[0]

    @property
    def cols(self):
        return self.bits.shape[1]

    def __repr__(self):
        return "BitMatrix(%d x %d)" % (self.rows, self.cols)


def _as_bits(m):
    if isinstance(m, BitMatrix):
        return m.bits
    return np.asarray(m, dtype=np.uint8) & 1


def _strings_to_array(strings):
    return np.array([[int(c) for c in s] for s in strings], dtype=np.uint8)


def _array_to_string(row):
    return "".join("1" if b else "0" for b in row)


def rank_and_row_basis(m):
    """Rank and a row basis over GF(2), by Gaussian elimination.

    Returns ``(rank, basis_rows)`` where ``basis_rows`` is the
    lowest-index-first list of input rows that are linearly independent and
    span the row space.
    """
    bits = _as_bits(m)
    basis = []        # reduced representatives, one leading column each
    leads = []
    basis_rows = []
    for i in range(bits.shape[0]):
        row = bits[i].copy()
        for b, lead in zip(basis, leads):
            if row[lead]:
                row ^= b
        nz = np.flatnonzero(row)
        if nz.size:
            basis.append(row)
            leads.append(nz[0])
            basis_rows.append(i)
    return len(basis_rows), basis_rows


def _gf2_inverse(a):
    """Inverse of a square GF(2) matrix (raises if singular)."""
    a = _as_bits(a)
    n = a.shape[0]
    aug = np.concatenate([a, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        piv = col + int(np.argmax(aug[col:, col]))
        if not aug[piv, col]:
            raise ValueError("matrix is singular over GF(2)")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        hits = np.flatnonzero(aug[:, col])
        hits = hits[hits != col]
        aug[hits] ^= aug[col]
    return aug[:, n:]


def _gf2_nullspace(a):
    """Rows form a basis of the right nullspace {x : a x = 0 over GF(2)}."""
    a = _as_bits(a).copy()
    rows, cols = a.shape
    pivot_cols = []
    row = 0
    for col in range(cols):
        if row == rows:
            break
        piv = row + int(np.argmax(a[row:, col]))
        if not a[piv, col]:
            continue
        if piv != row:
            a[[row, piv]] = a[[piv, row]]
        hits = np.flatnonzero(a[:, col])
        hits = hits[hits != row]
        a[hits] ^= a[row]
        pivot_cols.append(col)
        row += 1
    free_cols = [c for c in range(cols) if c not in pivot_cols]
    basis = np.zeros((len(free_cols), cols), dtype=np.uint8)
    for k, f in enumerate(free_cols):
        x = basis[k]
        x[f] = 1
        for rr in range(len(pivot_cols) - 1, -1, -1):
            x[pivot_cols[rr]] = np.dot(a[rr], x) & 1
    return basis


def select_substrings(nus):
    """Restrict bitstrings to a row basis of the position-by-string matrix.

    Every position (row of the 2N x D matrix) is a GF(2) combination of the
    basis rows, so strings that agree on the selected positions agree
    everywhere; distinctness survives the restriction.

    Parameters
    ----------
    nus : iterable of '0'/'1' strings, all the same length, pairwise distinct.

    Returns
    -------
    (selected_rows, tilde_nus) : positions kept (lowest-index-first) and the
        restricted substrings, in input order.
    """
    nus = list(nus)
    if len(nus) < 2:
        raise ValueError("substring selection needs at least two bitstrings")
    if len(set(nus)) != len(nus):
        raise DuplicateDeterminant("input bitstrings are not pairwise distinct")
    mat = _strings_to_array(nus)          # D x 2N
    _, selected = rank_and_row_basis(mat.T)
    tilde = ["".join(s[p] for p in selected) for s in nus]
    return selected, tilde


def _span_residue(echelon, v):
    """Reduce int v against ints with distinct leading bits; 0 iff in span."""
    for lead, w in sorted(echelon, reverse=True):
        if (v >> lead) & 1:
            v ^= w
    return v


def find_signature_vectors(tilde_nus, check=False, stats=None):
    """Signature vectors u_k that give the substrings distinct GF(2) images.

    For D distinct substrings of length r this returns min(r, 2*ceil(log2 D)-1)
    vectors of length r (as '0'/'1' strings).  Stacked into a matrix U, the map
    v -> U v over GF(2) sends the substrings to mutually distinct signatures;
    its kernel avoids every pairwise difference and (except for D=2 with r=2,
    where that is impossible by counting) every nonzero substring.

    When ``check`` is true, the kernel-avoidance properties are asserted at
    every step of the inductive construction.  ``stats``, if given a dict,
    receives per-step candidate-scan counts under ``"search_counts"``.
    """
    tilde_nus = list(tilde_nus)
    D = len(tilde_nus)
    if D < 2:
        raise ValueError("need at least two substrings")
    if len(set(tilde_nus)) != D:
        raise DuplicateDeterminant("substrings are not pairwise distinct")
    r = len(tilde_nus[0])
    m = signature_length(D)

    if r <= m:
        # The substrings already fit in the signature budget: identity map.
        eye = np.eye(r, dtype=np.uint8)
        return [_array_to_string(row) for row in eye]

    if D == 2:
        # Counting makes the full kernel property unsatisfiable here (the
        # forbidden set covers all of F_2^r); one differing bit is enough
        # for distinctness, which is all the single signature bit needs.
        arr = _strings_to_array(tilde_nus)
        j = int(np.flatnonzero(arr[0] ^ arr[1])[0])
        u = np.zeros(r, dtype=np.uint8)
        u[j] = 1
        return [_array_to_string(u)]

    T = _strings_to_array(tilde_nus)      # D x r, full column rank
    rank, gen_rows = rank_and_row_basis(T)
    if rank != r:
        raise ValueError("substrings must span their full bit space "
                         "(got rank %d < %d); run select_substrings first"
                         % (rank, r))
    P = T[gen_rows].T                      # columns are the generators
    P_inv = _gf2_inverse(P)

    # Work in coordinates where generator k becomes the unit vector e_k;
    # vectors live in Python ints with bit k = coordinate k.
    coords = (P_inv @ T.T) & 1             # r x D
    weights = (1 << np.arange(r, dtype=object))
    cur = {int(np.dot(weights, coords[:, i])) for i in range(D)}
    if len(cur) != D:
        raise AssertionError("coordinate map lost distinctness")

    search_counts = []
    w_echelon = []                         # (leading bit, vector) pairs, high first
    snapshots = []                         # (level, original set) for check
    for level in range(r, m, -1):
        top = 1 << (level - 1)
        if top not in cur:
            raise AssertionError("generator e_%d missing at level %d"
                                 % (level - 1, level))
        M = [v for v in cur if not v & top]
        N_red = [v ^ top for v in cur if v & top and v != top]
        forbidden = {0}
        forbidden.update(N_red)
        forbidden.update(M)
        forbidden.update(mj ^ mi for mj in M for mi in N_red)
        cand = 0
        while cand in forbidden:
            cand += 1
        if cand >= top:
            raise AssertionError("candidate search exhausted at level %d" % level)
        search_counts.append(cand + 1)
        if check:
            snapshots.append((level, set(cur)))
        w_echelon.insert(0, (level - 1, top ^ cand))
        cur = set(M)
        cur.add(cand)
        cur.update(cand ^ mi for mi in N_red)
        if len(cur) != D:
            raise AssertionError("replacement collapsed the vector set")

    if check:
        # Walking back up, the span of the w's collected so far must avoid
        # every nonzero vector of that level's set and every pairwise sum.
        for idx, (level, vec_set) in enumerate(reversed(snapshots)):
            ech = w_echelon[: idx + 1]
            vecs = sorted(vec_set)
            for v in vecs:
                if v and _span_residue(ech, v) == 0:
                    raise AssertionError("kernel contains a substring")
            for i, vi in enumerate(vecs):
                for vj in vecs[i + 1:]:
                    if _span_residue(ech, vi ^ vj) == 0:
                        raise AssertionError("kernel contains a difference")

    if stats is not None:
        stats["search_counts"] = search_counts

    # u-vectors: nullspace of the w's in coordinates, mapped back through P.
    W = np.zeros((len(w_echelon), r), dtype=np.uint8)
    for a, (_, w) in enumerate(w_echelon):
        for k in range(r):
            W[a, k] = (w >> k) & 1
    U_coord = _gf2_nullspace(W)            # m x r
    if U_coord.shape[0] != m:
        raise AssertionError("nullspace dimension %d != %d"
                             % (U_coord.shape[0], m))
    U = (P_inv.T @ U_coord.T).T & 1        # back to bit-position axes
    return [_array_to_string(row) for row in U]


@dataclass
class SignatureMap:
    """Output of :func:`compress`: positions kept, u-vectors, signatures.

    ``signatures[i]`` equals the GF(2) product of the stacked u-vectors with
    the i-th substring; all signatures are mutually distinct.
    """

    selected_rows: list = field(default_factory=list)
    u_vectors: list = field(default_factory=list)
    signatures: list = field(default_factory=list)

    @property
    def signature_bits(self):
        return len(self.u_vectors)

    @property
    def n_determinants(self):
        return len(self.signatures)

    def to_json(self):
        """Serialize; bit vectors go out as hex strings."""
        return json.dumps({
            "selected_rows": list(self.selected_rows),
            "u_vectors": [_bits_to_hex(u) for u in self.u_vectors],
            "signatures": [_bits_to_hex(b) for b in self.signatures],
        })

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        r = len(obj["selected_rows"])
        m = len(obj["u_vectors"])
        return cls(
            selected_rows=[int(i) for i in obj["selected_rows"]],
            u_vectors=[_hex_to_bits(h, r) for h in obj["u_vectors"]],
            signatures=[_hex_to_bits(h, m) for h in obj["signatures"]],
        )


def _bits_to_hex(bits):
    return format(int(bits, 2), "x") if bits else ""


def _hex_to_bits(h, width):
    if width == 0:
        return ""
    return format(int(h, 16), "0%db" % width)


def compress(nus, check=False):
    """Full compression: substring selection plus signature construction.

    Maps D distinct bitstrings to distinct signatures of
    ``min(r, 2*ceil(log2 D) - 1)`` bits, r being the selected substring
    length.  D=1 needs no compression and returns an empty map.
    """
    nus = list(nus)
    if not nus:
        raise ValueError("need at least one bitstring")
    if len(set(nus)) != len(nus):
        raise DuplicateDeterminant("input bitstrings are not pairwise distinct")
    if len(nus) == 1:
        return SignatureMap([], [], [""])
    selected, tilde = select_substrings(nus)
    us = find_signature_vectors(tilde, check=check)
    U = _strings_to_array(us)
    T = _strings_to_array(tilde)
    B = (T @ U.T) & 1
    sigs = [_array_to_string(row) for row in B]
    if len(set(sigs)) != len(sigs):
        raise AssertionError("signature construction failed to separate inputs")
    return SignatureMap(selected, us, sigs)
