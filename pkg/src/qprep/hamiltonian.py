"""Desk-scale Hamiltonians: FCIDUMP parsing and determinant-basis CI matrices.

The FCIDUMP reader/writer round-trips integrals bit-exactly (17 significant
digits).  CI matrices are assembled over (n_alpha, n_beta) sectors with
Slater-Condon rules; spin-orbitals interleave as 2p (alpha) / 2p+1 (beta),
and determinants are ordered lexicographically by (alpha, beta) occupation.
Everything is real-integral; complex Hamiltonians enter via direct dense
ingestion.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

__all__ = [
    "ParseError",
    "InconsistentHeader",
    "DimensionCapExceeded",
    "FciDump",
    "DenseHamiltonian",
    "AffineNormalizer",
    "parse_fcidump",
    "dump_fcidump",
    "build_ci_matrix",
    "normalize_spectrum",
    "save_hamiltonian",
    "load_hamiltonian",
]

HERMITICITY_TOL = 1e-12
DEFAULT_DIM_CAP = 4096


class ParseError(ValueError):
    """A malformed FCIDUMP line; carries the 1-based line number."""

    def __init__(self, line_no, reason):
        self.line_no = line_no
        self.reason = reason
        super().__init__("line %d: %s" % (line_no, reason))


class InconsistentHeader(ParseError):
    """An orbital index exceeds the NORB declared in the header."""


class DimensionCapExceeded(ValueError):
    """The requested CI sector is larger than the configured cap."""


@dataclass
class FciDump:
    """Parsed electron-integral file; two_body is stored fully expanded."""

    n_orb: int
    n_elec: int
    ms2: int
    core_energy: float
    one_body: np.ndarray      # (n, n), symmetric
    two_body: np.ndarray      # (n, n, n, n), chemist (pq|rs), 8-fold symmetric

    def __post_init__(self):
        self.one_body = np.asarray(self.one_body, dtype=float)
        self.two_body = np.asarray(self.two_body, dtype=float)
        n = self.n_orb
        if self.one_body.shape != (n, n):
            raise ValueError("one_body must be (n_orb, n_orb)")
        if self.two_body.shape != (n, n, n, n):
            raise ValueError("two_body must be (n_orb,)*4")
        if not np.allclose(self.one_body, self.one_body.T, atol=1e-12):
            raise ValueError("one-body integrals must be symmetric")
        g = self.two_body
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if not np.allclose(g, g.transpose(perm), atol=1e-12):
                raise ValueError("two-body integrals must be 8-fold symmetric")


def _set_two_body(g, p, q, r, s, value):
    for a, b in ((p, q), (q, p)):
        for c, d in ((r, s), (s, r)):
            g[a, b, c, d] = value
            g[c, d, a, b] = value


def _parse_header(lines):
    """Extract NORB/NELEC/MS2 from the leading namelist; return end line."""
    joined = []
    end = None
    for i, raw in enumerate(lines):
        stripped = raw.strip()
        joined.append(stripped)
        token = stripped.upper().replace(" ", "")
        if token.endswith("&END") or token.endswith("/"):
            end = i
            break
    if end is None:
        raise ParseError(1, "header namelist is never terminated")
    text = " ".join(joined)
    text = text.upper()
    for t in ("&FCI", "&END", "/"):
        text = text.replace(t, " ")
    fields = {}
    key = None
    for chunk in text.replace(",", " ").split():
        if "=" in chunk:
            key, _, val = chunk.partition("=")
            fields[key] = [val] if val else []
        elif key is not None:
            fields[key].append(chunk)
    def intval(name, default=None):
        if name not in fields or not fields[name]:
            if default is None:
                raise ParseError(1, "header is missing %s" % name)
            return default
        try:
            return int(fields[name][0])
        except ValueError:
            raise ParseError(1, "header %s is not an integer" % name) from None
    n_orb = intval("NORB")
    n_elec = intval("NELEC", 0)
    ms2 = intval("MS2", 0)
    return n_orb, n_elec, ms2, end


def parse_fcidump(text):
    """Parse FCIDUMP text into an :class:`FciDump`.

    Header keys other than NORB/NELEC/MS2 (ORBSYM, ISYM, ...) are accepted
    and ignored.  Data lines are ``value i j k l`` with the usual
    conventions: all-zero indices give the core energy, k=l=0 a one-body
    element, otherwise a chemist-notation two-body element stored under all
    eight index permutations.
    """
    lines = text.splitlines()
    if not lines or not lines[0].strip().upper().startswith("&FCI"):
        raise ParseError(1, "file does not start with an &FCI namelist")
    n_orb, n_elec, ms2, header_end = _parse_header(lines)
    if n_orb < 1:
        raise ParseError(1, "NORB must be positive")
    h = np.zeros((n_orb, n_orb))
    g = np.zeros((n_orb, n_orb, n_orb, n_orb))
    core = 0.0
    for line_no0 in range(header_end + 1, len(lines)):
        line = lines[line_no0].strip()
        no = line_no0 + 1
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 5:
            raise ParseError(no, "expected `value i j k l`, got %d tokens"
                             % len(tokens))
        try:
            value = float(tokens[0].upper().replace("D", "E"))
        except ValueError:
            raise ParseError(no, "bad numeric value %r" % tokens[0]) from None
        try:
            i, j, k, l = (int(t) for t in tokens[1:])
        except ValueError:
            raise ParseError(no, "indices must be integers") from None
        if min(i, j, k, l) < 0:
            raise ParseError(no, "negative orbital index")
        if max(i, j, k, l) > n_orb:
            raise InconsistentHeader(no, "orbital index %d exceeds NORB=%d"
                                     % (max(i, j, k, l), n_orb))
        if i == j == k == l == 0:
            core = value
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise ParseError(no, "one-body line needs two orbital indices")
            h[i - 1, j - 1] = value
            h[j - 1, i - 1] = value
        elif min(i, j, k, l) == 0:
            raise ParseError(no, "two-body line has a zero orbital index")
        else:
            _set_two_body(g, i - 1, j - 1, k - 1, l - 1, value)
    return FciDump(n_orb, n_elec, ms2, core, h, g)


def dump_fcidump(fd):
    """Serialize to FCIDUMP text; numeric echo is bit-exact on re-parse."""
    out = io.StringIO()
    out.write("&FCI NORB=%d,NELEC=%d,MS2=%d,\n&END\n" %
              (fd.n_orb, fd.n_elec, fd.ms2))
    n = fd.n_orb

    def emit(value, i, j, k, l):
        out.write(" %.16E %3d %3d %3d %3d\n" % (value, i, j, k, l))

    for p in range(n):
        for q in range(p + 1):
            for r in range(p + 1):
                s_top = q if r == p else r
                for s in range(s_top + 1):
                    v = fd.two_body[p, q, r, s]
                    if v != 0.0:
                        emit(v, p + 1, q + 1, r + 1, s + 1)
    for p in range(n):
        for q in range(p + 1):
            if fd.one_body[p, q] != 0.0:
                emit(fd.one_body[p, q], p + 1, q + 1, 0, 0)
    emit(fd.core_energy, 0, 0, 0, 0)
    return out.getvalue()


@dataclass
class DenseHamiltonian:
    """Hermitian matrix plus optional determinant labels for its basis."""

    entries: np.ndarray
    basis_labels: list | None = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError("entries must be a square matrix")
        dev = np.max(np.abs(self.entries - self.entries.conj().T)) \
            if self.entries.size else 0.0
        if dev >= HERMITICITY_TOL:
            raise ValueError("matrix is not Hermitian (max deviation %.3g)" % dev)
        if self.basis_labels is not None:
            self.basis_labels = list(self.basis_labels)
            if len(self.basis_labels) != self.entries.shape[0]:
                raise ValueError("need one basis label per row")

    @property
    def dim(self):
        return self.entries.shape[0]

    def eigensystem(self):
        """Ascending eigenvalues and the matching eigenvector columns."""
        return np.linalg.eigh(self.entries)


@dataclass
class AffineNormalizer:
    """Invertible energy map E -> scale * E + shift."""

    scale: float
    shift: float

    def apply(self, energy):
        return self.scale * np.asarray(energy) + self.shift

    def invert(self, energy):
        return (np.asarray(energy) - self.shift) / self.scale

    def apply_matrix(self, h: DenseHamiltonian) -> DenseHamiltonian:
        ent = self.scale * h.entries + self.shift * np.eye(h.dim)
        return DenseHamiltonian(ent, h.basis_labels)


def normalize_spectrum(h, margin=0.1):
    """Affinely map the spectrum of ``h`` into [margin, 1 - margin].

    Returns the transformed Hamiltonian and the normalizer that was applied
    (so original energies are recoverable via ``normalizer.invert``).
    Bounds come from an exact eigensolve, which is cheap at desk scale.
    """
    if not 0 <= margin < 0.5:
        raise ValueError("margin must lie in [0, 0.5)")
    evals = np.linalg.eigvalsh(h.entries)
    lo, hi = float(evals[0]), float(evals[-1])
    if hi - lo < 1e-300:
        norm = AffineNormalizer(1.0, 0.5 - lo)
    else:
        scale = (1 - 2 * margin) / (hi - lo)
        norm = AffineNormalizer(scale, margin - scale * lo)
    return norm.apply_matrix(h), norm


def _phase_apply(mask, ops):
    """Apply a string of ladder operators (leftmost acts last) to ``mask``.

    ops is a sequence of ("c"|"a", spin_orbital).  Returns (phase, mask)
    with phase 0 when the string annihilates the state.
    """
    phase = 1
    for kind, s in reversed(ops):
        bit = 1 << s
        occupied = bool(mask & bit)
        if (kind == "a") != occupied:
            return 0, None
        if (mask & (bit - 1)).bit_count() & 1:
            phase = -phase
        mask ^= bit
    return phase, mask


def _g_so(g, a, b, c, d):
    if (a ^ b) & 1 or (c ^ d) & 1:
        return 0.0
    return g[a >> 1, b >> 1, c >> 1, d >> 1]


def _sector_determinants(n_orb, n_alpha, n_beta):
    dets = []
    for occ_a in combinations(range(n_orb), n_alpha):
        for occ_b in combinations(range(n_orb), n_beta):
            so = sorted([2 * p for p in occ_a] + [2 * p + 1 for p in occ_b])
            mask = 0
            for s in so:
                mask |= 1 << s
            dets.append((mask, tuple(so)))
    return dets


def build_ci_matrix(fd, n_alpha, n_beta, dim_cap=DEFAULT_DIM_CAP):
    """Full CI matrix of the (n_alpha, n_beta) sector by Slater-Condon rules.

    Matrix elements are evaluated through explicit second-quantized
    operator strings, so fermionic signs need no case analysis.  The basis
    is labelled by 2*n_orb-bit occupation strings (alpha bit first in each
    spin-orbital pair).
    """
    n = fd.n_orb
    if not 0 <= n_alpha <= n or not 0 <= n_beta <= n:
        raise ValueError("electron counts must lie in [0, n_orb]")
    dim = math.comb(n, n_alpha) * math.comb(n, n_beta)
    if dim > dim_cap:
        raise DimensionCapExceeded("sector dimension %d exceeds cap %d"
                                   % (dim, dim_cap))
    dets = _sector_determinants(n, n_alpha, n_beta)
    h1, g = fd.one_body, fd.two_body
    n_so = 2 * n
    H = np.zeros((dim, dim))
    for j, (mask_j, occ_j) in enumerate(dets):
        # diagonal
        e = fd.core_energy
        for p_ in occ_j:
            e += h1[p_ >> 1, p_ >> 1]
        for p_ in occ_j:
            for q_ in occ_j:
                e += 0.5 * (_g_so(g, p_, p_, q_, q_) - _g_so(g, p_, q_, q_, p_))
        H[j, j] = e
        # off-diagonal upper triangle
        for i in range(j + 1, dim):
            mask_i, occ_i = dets[i]
            diff = mask_i ^ mask_j
            nd = diff.bit_count()
            if nd > 4:
                continue
            if nd == 2:
                ann = (diff & mask_j).bit_length() - 1
                cre = (diff & mask_i).bit_length() - 1
                val = 0.0
                phase, _ = _phase_apply(mask_j, [("c", cre), ("a", ann)])
                val += phase * (h1[cre >> 1, ann >> 1] if not (cre ^ ann) & 1
                                else 0.0)
                for spec in occ_j:
                    for a_, b_, c_, d_ in ((cre, ann, spec, spec),
                                           (spec, spec, cre, ann),
                                           (cre, spec, spec, ann),
                                           (spec, ann, cre, spec)):
                        gv = _g_so(g, a_, b_, c_, d_)
                        if gv == 0.0:
                            continue
                        ph, out = _phase_apply(
                            mask_j, [("c", a_), ("c", c_), ("a", d_), ("a", b_)])
                        if ph and out == mask_i:
                            val += 0.5 * gv * ph
                H[i, j] = H[j, i] = val
            elif nd == 4:
                rem = diff & mask_j
                add = diff & mask_i
                a1 = rem.bit_length() - 1
                a2 = (rem ^ (1 << a1)).bit_length() - 1
                c1 = add.bit_length() - 1
                c2 = (add ^ (1 << c1)).bit_length() - 1
                val = 0.0
                for b_, d_ in ((a1, a2), (a2, a1)):
                    for a_, c_ in ((c1, c2), (c2, c1)):
                        gv = _g_so(g, a_, b_, c_, d_)
                        if gv == 0.0:
                            continue
                        ph, out = _phase_apply(
                            mask_j, [("c", a_), ("c", c_), ("a", d_), ("a", b_)])
                        if ph and out == mask_i:
                            val += 0.5 * gv * ph
                H[i, j] = H[j, i] = val
    labels = ["".join("1" if m & (1 << s) else "0" for s in range(n_so))
              for m, _ in dets]
    return DenseHamiltonian(H, labels)


def save_hamiltonian(h, path):
    """Write matrix (+labels) to ``path``: CSV if it ends in .csv, else npz."""
    if str(path).endswith(".csv"):
        np.savetxt(path, h.entries, delimiter=",")
        return
    with open(path, "wb") as f:
        labels = np.array(h.basis_labels if h.basis_labels is not None else [])
        np.savez(f, entries=h.entries, basis_labels=labels)


def load_hamiltonian(path):
    """Inverse of :func:`save_hamiltonian`."""
    if str(path).endswith(".csv"):
        return DenseHamiltonian(np.loadtxt(path, delimiter=",", dtype=complex))
    with open(path, "rb") as f:
        data = np.load(f, allow_pickle=False)
        labels = [str(x) for x in data["basis_labels"]] or None
        return DenseHamiltonian(data["entries"], labels)
