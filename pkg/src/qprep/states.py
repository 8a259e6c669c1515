"""Wavefunction containers and conversions: sums of Slater determinants and
matrix product states.

Two interchangeable representations are provided:

* :class:`SosState` — a sum of Slater determinants ("SOS"), stored as
  ``(amplitude, occupation)`` pairs where the occupation is a bit string over
  spin orbitals (character ``s`` is spin orbital ``s``; spin orbitals are
  interleaved, ``2p`` = alpha and ``2p + 1`` = beta of spatial orbital ``p``).
* :class:`MpsState` — a matrix product state with one tensor per spatial
  orbital and local dimension 4 (empty / beta / alpha / doubly occupied).

The canonical form used throughout makes every tensor except the first an
isometry when summing over its physical and *right* bond index; this is the
orientation in which the site tensors embed directly into state-preparation
unitaries.  Conversions in both directions, truncation, overlaps, and dense
statevector export (for small systems) are included.

All functions are pure: inputs are never mutated.
"""

import json
from dataclasses import dataclass, field

import numpy as np

LEFT_ORTHO_TOL = 1e-10
STATEVECTOR_LIMIT = 65536  # largest dense vector the export paths will build

# physical index n = 2*n_alpha + n_beta; bits are written alpha-then-beta
_DIGIT_BITS = ("00", "01", "10", "11")
_SPATIAL_CHARS = {"0": "00", "b": "01", "a": "10", "2": "11"}


class TermBudgetExceeded(RuntimeError):
    """A determinant expansion produced more terms than the configured cap."""


def occupation_from_spatial(spatial):
    """Spell out a spatial-orbital occupation pattern as a spin-orbital string.

    ``spatial`` is a string over ``{"0", "a", "b", "2"}`` (empty, spin-up,
    spin-down, doubly occupied), one character per spatial orbital.  Each
    character expands to two adjacent spin-orbital bits, alpha first, e.g.
    ``"2a0"`` -> ``"111000"``.
    """
    try:
        return "".join(_SPATIAL_CHARS[c] for c in spatial.lower())
    except KeyError as exc:
        raise ValueError(f"unknown spatial occupation character {exc}") from None


@dataclass
class SosState:
    """A wavefunction given as a list of weighted Slater determinants.

    ``terms`` holds ``(amplitude, occupation)`` pairs with mutually distinct
    occupation strings of length ``n_spin_orbitals``.  Set ``normalized=True``
    to assert unit norm (checked to 1e-10).
    """

    n_spin_orbitals: int
    terms: list
    normalized: bool = False

    def __post_init__(self):
        if self.n_spin_orbitals < 1:
            raise ValueError("n_spin_orbitals must be positive")
        clean = []
        for amp, occ in self.terms:
            occ = str(occ)
            if len(occ) != self.n_spin_orbitals or set(occ) - {"0", "1"}:
                raise ValueError(f"bad occupation string {occ!r}")
            clean.append((complex(amp), occ))
        if len({occ for _, occ in clean}) != len(clean):
            raise ValueError("occupation strings must be distinct")
        self.terms = clean
        if self.normalized and abs(self.norm() ** 2 - 1.0) > 1e-10:
            raise ValueError("state flagged normalized but norm^2 != 1")

    def norm(self):
        return float(np.sqrt(sum(abs(a) ** 2 for a, _ in self.terms)))

    def normalize(self):
        """Return a unit-norm copy (ValueError on the zero state)."""
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero state")
        return SosState(self.n_spin_orbitals,
                        [(a / n, occ) for a, occ in self.terms],
                        normalized=True)

    def amplitude(self, occ):
        for a, o in self.terms:
            if o == occ:
                return a
        return 0j

    def to_json_dict(self):
        return {
            "n_spin_orbitals": self.n_spin_orbitals,
            "terms": [{"re": a.real, "im": a.imag, "occ": occ}
                      for a, occ in self.terms],
        }

    @classmethod
    def from_json_dict(cls, obj, normalized=False):
        terms = [(complex(t["re"], t["im"]), t["occ"]) for t in obj["terms"]]
        return cls(int(obj["n_spin_orbitals"]), terms, normalized=normalized)


def _left_ortho_residual(tensor):
    mat = tensor.reshape(tensor.shape[0], -1)
    gram = mat @ mat.conj().T
    return float(np.max(np.abs(gram - np.eye(mat.shape[0]))))


@dataclass
class MpsState:
    """A matrix product state: ``tensors[j]`` has shape (chi_{j-1}, d, chi_j).

    Boundary bond dimensions must be 1.  ``canonical_form`` is ``None`` or
    ``"left"``; in the latter case every tensor after the first must satisfy
    the row-isometry condition (physical and right bond indices summed) to
    within 1e-10 — the first tensor carries the norm.
    """

    tensors: list
    local_dim: int = None
    canonical_form: str = None

    def __post_init__(self):
        if not self.tensors:
            raise ValueError("an MPS needs at least one site")
        tensors = [np.asarray(t, dtype=complex) for t in self.tensors]
        for t in tensors:
            if t.ndim != 3:
                raise ValueError("site tensors must be rank 3")
        d = tensors[0].shape[1]
        if self.local_dim is None:
            self.local_dim = d
        elif self.local_dim != d:
            raise ValueError("local_dim does not match tensor shapes")
        for j, t in enumerate(tensors):
            if t.shape[1] != d:
                raise ValueError("inconsistent physical dimensions")
            if j and tensors[j - 1].shape[2] != t.shape[0]:
                raise ValueError(f"bond dimension mismatch at site {j}")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        if self.canonical_form not in (None, "left"):
            raise ValueError("canonical_form must be None or 'left'")
        if self.canonical_form == "left":
            for j, t in enumerate(tensors[1:], start=1):
                res = _left_ortho_residual(t)
                if res > LEFT_ORTHO_TOL:
                    raise ValueError(
                        f"site {j} violates the isometry condition "
                        f"(residual {res:.2e})")
        self.tensors = tensors

    @property
    def n_sites(self):
        return len(self.tensors)

    @property
    def bond_dims(self):
        """Bond dimensions chi_0 .. chi_N (boundaries included)."""
        return [self.tensors[0].shape[0]] + [t.shape[2] for t in self.tensors]

    def amplitude(self, basis):
        """Coefficient of one basis state.

        ``basis`` is either a sequence of physical digits, or (for local
        dimension 4) a spin-orbital occupation string of length 2 * n_sites.
        """
        if isinstance(basis, str):
            if self.local_dim != 4:
                raise ValueError("occupation strings require local_dim 4")
            if len(basis) != 2 * self.n_sites:
                raise ValueError("occupation string has the wrong length")
            digits = [int(basis[2 * j:2 * j + 2], 2) for j in range(self.n_sites)]
        else:
            digits = list(basis)
            if len(digits) != self.n_sites:
                raise ValueError("wrong number of digits")
        vec = np.ones(1, dtype=complex)
        for j, nj in enumerate(digits):
            vec = vec @ self.tensors[j][:, nj, :]
        return complex(vec[0])

    def norm(self):
        return float(np.sqrt(max(overlap(self, self).real, 0.0)))


# ---------------------------------------------------------------------------
# Dense statevector export
# ---------------------------------------------------------------------------

def sos_to_statevector(state):
    """Dense vector of dimension 2**n_spin_orbitals; the amplitude of
    occupation ``occ`` sits at index ``int(occ, 2)``."""
    dim = 2 ** state.n_spin_orbitals
    if dim > STATEVECTOR_LIMIT:
        raise ValueError(f"statevector would have {dim} entries "
                         f"(limit {STATEVECTOR_LIMIT})")
    vec = np.zeros(dim, dtype=complex)
    for amp, occ in state.terms:
        vec[int(occ, 2)] = amp
    return vec


def mps_to_statevector(state):
    """Dense vector of dimension d**n_sites, site 0 most significant.

    For local dimension 4 the index convention coincides with
    :func:`sos_to_statevector` on the matching occupation strings.
    """
    dim = state.local_dim ** state.n_sites
    if dim > STATEVECTOR_LIMIT:
        raise ValueError(f"statevector would have {dim} entries "
                         f"(limit {STATEVECTOR_LIMIT})")
    vec = np.ones((1, 1), dtype=complex)
    for t in state.tensors:
        vec = np.tensordot(vec, t, axes=(1, 0))
        vec = vec.reshape(-1, t.shape[2])
    return vec[:, 0]


# ---------------------------------------------------------------------------
# Canonical form and truncation
# ---------------------------------------------------------------------------

def _sweep_to_left_form(tensors):
    """Right-to-left SVD sweep making sites 1..N-1 row isometries.

    The represented vector is preserved exactly; the norm (and any global
    phase) accumulates in the site-0 tensor.  Exact rank deficiencies shrink
    the bonds.
    """
    ts = [t.copy() for t in tensors]
    for j in range(len(ts) - 1, 0, -1):
        chi_l, d, chi_r = ts[j].shape
        u, s, vh = np.linalg.svd(ts[j].reshape(chi_l, d * chi_r),
                                 full_matrices=False)
        ts[j] = vh.reshape(-1, d, chi_r)
        ts[j - 1] = np.tensordot(ts[j - 1], u * s, axes=(2, 0))
    return ts


def left_canonicalize(state):
    """Return an equivalent MPS in the left-canonical form.

    The statevector is unchanged (up to floating-point roundoff — no gauge
    phase is introduced beyond what the SVD fixes internally).
    """
    return MpsState(_sweep_to_left_form(state.tensors),
                    state.local_dim, canonical_form="left")


def compress_mps(state, chi_max=None, weight_tol=None):
    """Truncate bond dimensions; returns ``(compressed, fidelity)``.

    A left-to-right sweep of singular value truncations, each performed on a
    genuine Schmidt spectrum of the current state, so the reported fidelity
    |<out|in>|^2 (norm-independent) is exactly the product over bonds of the
    retained Schmidt weight fractions.  Keeps, per bond, at most ``chi_max``
    values and only those with squared singular value above ``weight_tol``
    (at least one is always kept).  The output is renormalized to the input
    norm and returned in left-canonical form.
    """
    if chi_max is None and weight_tol is None:
        raise ValueError("give chi_max and/or weight_tol")
    if chi_max is not None and chi_max < 1:
        raise ValueError("chi_max must be at least 1")
    ts = _sweep_to_left_form(state.tensors)
    fidelity = 1.0
    carry = None
    for j in range(len(ts) - 1):
        t = ts[j] if carry is None else np.tensordot(carry, ts[j], axes=(1, 0))
        chi_l, d, chi_r = t.shape
        u, s, vh = np.linalg.svd(t.reshape(chi_l * d, chi_r),
                                 full_matrices=False)
        keep = len(s)
        if chi_max is not None:
            keep = min(keep, chi_max)
        if weight_tol is not None:
            keep = min(keep, max(int(np.sum(s ** 2 > weight_tol)), 1))
        total = float(np.sum(s ** 2))
        retained = float(np.sum(s[:keep] ** 2))
        frac = retained / total if total > 0.0 else 1.0
        fidelity *= frac
        s_kept = s[:keep] / np.sqrt(frac) if frac > 0.0 else s[:keep]
        ts[j] = u[:, :keep].reshape(chi_l, d, keep)
        carry = s_kept[:, None] * vh[:keep]
    if carry is not None:
        ts[-1] = np.tensordot(carry, ts[-1], axes=(1, 0))
    out = MpsState(_sweep_to_left_form(ts), state.local_dim,
                   canonical_form="left")
    return out, fidelity


# ---------------------------------------------------------------------------
# SOS <-> MPS conversions
# ---------------------------------------------------------------------------

def mps_to_sos(state, threshold, term_budget=1_000_000):
    """Expand an MPS into determinants, dropping weight below ``threshold``.

    Depth-first traversal over physical digits keeping running partial
    coefficients; a branch is pruned as soon as the squared norm of its
    partial coefficient vector drops to ``threshold`` or below.  In the
    left-canonical form that norm bounds every completion's |coefficient|^2,
    so every determinant with squared amplitude strictly above ``threshold``
    is guaranteed to appear.  Raises :class:`TermBudgetExceeded` if more than
    ``term_budget`` determinants survive.
    """
    if state.local_dim != 4:
        raise ValueError("determinant expansion requires local_dim 4")
    if threshold < 0.0:
        raise ValueError("threshold must be nonnegative")
    ts = (state.tensors if state.canonical_form == "left"
          else _sweep_to_left_form(state.tensors))
    n = len(ts)
    found = []
    prefix = []

    def walk(j, coeff):
        if float(np.vdot(coeff, coeff).real) <= threshold:
            return
        if j == n:
            if len(found) >= term_budget:
                raise TermBudgetExceeded(
                    f"more than {term_budget} determinants above threshold")
            found.append((complex(coeff[0]), "".join(prefix)))
            return
        for nj in range(4):
            prefix.append(_DIGIT_BITS[nj])
            walk(j + 1, coeff @ ts[j][:, nj, :])
            prefix.pop()

    walk(0, np.ones(1, dtype=complex))
    found.sort(key=lambda t: (-abs(t[0]), t[1]))
    return SosState(2 * n, found)


def _determinant_tensors(amp, occ):
    """Bond-dimension-1 tensors for a single weighted determinant."""
    n = len(occ) // 2
    ts = []
    for j in range(n):
        t = np.zeros((1, 4, 1), dtype=complex)
        t[0, int(occ[2 * j:2 * j + 2], 2), 0] = amp if j == 0 else 1.0
        ts.append(t)
    return ts


def _direct_sum(ta, tb):
    """Tensors of the sum of two MPS (bond dimensions add)."""
    n = len(ta)
    if n == 1:
        return [ta[0] + tb[0]]
    out = []
    for j in range(n):
        a, b = ta[j], tb[j]
        if j == 0:
            out.append(np.concatenate([a, b], axis=2))
        elif j == n - 1:
            out.append(np.concatenate([a, b], axis=0))
        else:
            t = np.zeros((a.shape[0] + b.shape[0], a.shape[1],
                          a.shape[2] + b.shape[2]), dtype=complex)
            t[:a.shape[0], :, :a.shape[2]] = a
            t[a.shape[0]:, :, a.shape[2]:] = b
            out.append(t)
    return out


def sos_to_mps(state, chi_max, compress_every=8):
    """Build an MPS from a determinant expansion; returns ``(mps, fidelity)``.

    Terms are added largest-|amplitude| first as bond-1 MPSs; the running sum
    is truncated back to ``chi_max`` every ``compress_every`` additions (and
    once at the end).  The reported fidelity is |<mps|state>|^2 with both
    sides normalized, evaluated against the exact input expansion.
    """
    if state.n_spin_orbitals % 2:
        raise ValueError("need an even number of spin orbitals")
    if not state.terms:
        raise ValueError("cannot build an MPS from an empty expansion")
    order = sorted(state.terms, key=lambda t: (-abs(t[0]), t[1]))
    acc = _determinant_tensors(*order[0])
    for count, (amp, occ) in enumerate(order[1:], start=2):
        acc = _direct_sum(acc, _determinant_tensors(amp, occ))
        if count % compress_every == 0:
            acc = compress_mps(MpsState(acc), chi_max=chi_max)[0].tensors
    mps, _ = compress_mps(MpsState(acc), chi_max=chi_max)
    nm, ns = mps.norm(), state.norm()
    if nm == 0.0 or ns == 0.0:
        return mps, 0.0
    fidelity = abs(overlap(mps, state)) ** 2 / (nm * nm * ns * ns)
    return mps, float(fidelity)


# ---------------------------------------------------------------------------
# Overlaps
# ---------------------------------------------------------------------------

def overlap(a, b):
    """Inner product <a|b> between any mix of SOS and MPS states.

    Evaluated without dense statevectors: determinant dictionaries for
    SOS-SOS, transfer-matrix contraction for MPS-MPS, and per-determinant
    amplitude extraction for the mixed case.
    """
    if isinstance(a, SosState) and isinstance(b, SosState):
        if a.n_spin_orbitals != b.n_spin_orbitals:
            raise ValueError("spin-orbital counts differ")
        amps = {occ: amp for amp, occ in a.terms}
        return complex(sum(np.conj(amps[occ]) * amp
                           for amp, occ in b.terms if occ in amps))
    if isinstance(a, MpsState) and isinstance(b, MpsState):
        if a.n_sites != b.n_sites or a.local_dim != b.local_dim:
            raise ValueError("MPS shapes are incompatible")
        env = np.ones((1, 1), dtype=complex)
        for ta, tb in zip(a.tensors, b.tensors):
            env = np.einsum("ab,anc,bnd->cd", env, np.conj(ta), tb)
        return complex(env[0, 0])
    if isinstance(a, SosState) and isinstance(b, MpsState):
        if b.local_dim != 4 or 2 * b.n_sites != a.n_spin_orbitals:
            raise ValueError("MPS does not match the spin-orbital count")
        return complex(sum(np.conj(amp) * b.amplitude(occ)
                           for amp, occ in a.terms))
    if isinstance(a, MpsState) and isinstance(b, SosState):
        return complex(np.conj(overlap(b, a)))
    raise TypeError("overlap expects SosState or MpsState arguments")


# ---------------------------------------------------------------------------
# Spin-orbital reordering
# ---------------------------------------------------------------------------

def permute_spin_orbitals(state, perm):
    """Relabel spin orbitals of an SOS state; ``perm[p]`` is the new index of
    spin orbital ``p``.

    Determinants are kept in the ascending-creation-operator convention, so
    each term picks up the parity sign of its relabeled occupied list.  A
    permutation followed by its inverse restores every amplitude exactly
    (the two parity signs cancel).
    """
    n = state.n_spin_orbitals
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ValueError("perm must be a permutation of range(n_spin_orbitals)")
    new_terms = []
    for amp, occ in state.terms:
        relabeled = [perm[p] for p in range(n) if occ[p] == "1"]
        sign = 1
        for i in range(len(relabeled)):
            for j in range(i + 1, len(relabeled)):
                if relabeled[i] > relabeled[j]:
                    sign = -sign
        new_occ = ["0"] * n
        for q in relabeled:
            new_occ[q] = "1"
        new_terms.append((sign * amp, "".join(new_occ)))
    return SosState(n, new_terms, normalized=state.normalized)


def spin_blocked_permutation(n_spin_orbitals):
    """Permutation taking the interleaved order (a0 b0 a1 b1 ...) to the
    blocked order (a0 a1 ... b0 b1 ...), for use with
    :func:`permute_spin_orbitals`; the parity signs it induces implement the
    convention change to all-alpha-first operator ordering."""
    if n_spin_orbitals % 2:
        raise ValueError("need an even number of spin orbitals")
    half = n_spin_orbitals // 2
    perm = [0] * n_spin_orbitals
    for j in range(half):
        perm[2 * j] = j
        perm[2 * j + 1] = half + j
    return perm


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_sos(state, path):
    """Write an SOS state as JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state.to_json_dict(), fh, indent=1)


def load_sos(path, normalized=False):
    with open(path, "r", encoding="utf-8") as fh:
        return SosState.from_json_dict(json.load(fh), normalized=normalized)


def save_mps(state, path):
    """Write an MPS to a binary container (one shape-tagged array per site)."""
    arrays = {f"tensor_{j}": t for j, t in enumerate(state.tensors)}
    with open(path, "wb") as fh:
        np.savez(fh,
                 local_dim=np.array(state.local_dim),
                 canonical=np.array(state.canonical_form or ""),
                 **arrays)


def load_mps(path):
    with open(path, "rb") as fh:
        data = np.load(fh)
        n = len([k for k in data.files if k.startswith("tensor_")])
        tensors = [data[f"tensor_{j}"] for j in range(n)]
        canonical = str(data["canonical"]) or None
        return MpsState(tensors, int(data["local_dim"]), canonical)
