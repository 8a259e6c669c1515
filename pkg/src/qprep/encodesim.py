"""Exact simulation of the two state-preparation circuits.

Two independent preparation strategies are verified here at the statevector
level:

* the determinant-superposition encoder: amplitudes are loaded on an
  enumeration register, determinants written into the system register, a
  short signature computed into an identification register through CNOTs
  (using the compressed map from :mod:`qprep.gf2`), and both ancilla
  registers uncomputed again;
* the sequential matrix-product-state circuit: one unitary per site, acting
  on the site and a shared bond ancilla register, each unitary either
  completed directly from the site tensor or synthesized as a product of
  Householder reflections.

Lookup operations are simulated as exact classical-data-controlled
permutations (their gate cost lives in :mod:`qprep.resources`); every other
step is applied gate by gate.  Register layout for the encoder: system
qubits are the low bits (qubit ``s`` holds spin orbital ``s``), then the
enumeration register, then the identification register.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from . import gf2
from .states import (LEFT_ORTHO_TOL, MpsState, SosState,
                     _left_ortho_residual, mps_to_statevector)

MAX_SYSTEM_QUBITS = 12
MAX_DETERMINANTS = 64
MAX_CIRCUIT_DIM = 2 ** 20


class BudgetExceeded(ValueError):
    """The requested simulation is larger than the configured desk scale."""


class NotLeftCanonical(ValueError):
    """The MPS circuit constructions need a normalized left-canonical MPS."""


# ---------------------------------------------------------------------------
# Determinant-superposition encoder
# ---------------------------------------------------------------------------

@dataclass
class EncodingPlan:
    """Gate-level plan derived from a signature map.

    ``cnot_layers[k]`` lists ``(system_qubit, identification_qubit)`` pairs —
    one CNOT per set bit of the k-th mapping vector, controls restricted to
    the selected rows.  ``uncompute_controls[i]`` is the signature pattern
    that conditions clearing the enumeration register for determinant i.
    """

    signature_map: gf2.SignatureMap
    cnot_layers: list
    uncompute_controls: list

    def __post_init__(self):
        allowed = set(self.signature_map.selected_rows)
        for k, layer in enumerate(self.cnot_layers):
            for sys_q, id_q in layer:
                if sys_q not in allowed:
                    raise ValueError(
                        f"CNOT control {sys_q} is not a selected row")
                if id_q != k:
                    raise ValueError("layer targets must match their index")

    @property
    def n_cnots(self):
        """CNOT count of one signature-computation pass."""
        return sum(len(layer) for layer in self.cnot_layers)

    @property
    def n_uncompute_ops(self):
        return len(self.uncompute_controls)


def plan_encoding(state):
    """Compress the determinant list of ``state`` and lay out the gates."""
    smap = gf2.compress([occ for _, occ in state.terms])
    layers = []
    for k, u in enumerate(smap.u_vectors):
        layers.append([(smap.selected_rows[j], k)
                       for j, bit in enumerate(u) if bit == "1"])
    return EncodingPlan(smap, layers, list(smap.signatures))


@dataclass
class EncodingResult:
    """Final state of the simulated encoder plus bookkeeping.

    ``state`` maps basis keys (ints over all registers) to amplitudes.
    ``fidelity`` is the squared overlap of the ancilla-zero block with the
    target superposition; ``ancilla_residual`` is the total probability left
    outside that block.
    """

    state: dict
    n_system: int
    n_enumeration: int
    n_identification: int
    fidelity: float
    ancilla_residual: float
    n_cnots_applied: int
    n_uncompute_ops: int

    @property
    def n_qubits(self):
        return self.n_system + self.n_enumeration + self.n_identification

    def system_probabilities(self):
        """Measurement distribution over system-register keys, ancilla
        registers traced out."""
        probs = {}
        mask = (1 << self.n_system) - 1
        for key, amp in self.state.items():
            probs[key & mask] = probs.get(key & mask, 0.0) + abs(amp) ** 2
        return probs


def occupation_key(occ):
    """Basis key of an occupation string (system qubit s <-> character s)."""
    return int(occ[::-1], 2)


def simulate_sos_encoding(state, plan=None):
    """Run the six-step encoder on ``state`` and check it against the target.

    All steps after the initial amplitude load are basis permutations, so the
    sparse state never grows beyond one entry per determinant.
    """
    n_sys = state.n_spin_orbitals
    n_det = len(state.terms)
    if n_det == 0:
        raise ValueError("nothing to encode")
    if n_sys > MAX_SYSTEM_QUBITS or n_det > MAX_DETERMINANTS:
        raise BudgetExceeded(
            f"{n_sys} system qubits / {n_det} determinants exceed the "
            f"simulation budget ({MAX_SYSTEM_QUBITS} / {MAX_DETERMINANTS})")
    if plan is None:
        plan = plan_encoding(state)
    n_enum = (n_det - 1).bit_length()
    n_id = plan.signature_map.signature_bits
    enum_mask = ((1 << n_enum) - 1) << n_sys

    # step 1: amplitudes against the enumeration register
    vec = {(i << n_sys): amp for i, (amp, _) in enumerate(state.terms)}

    # step 2: write determinant i into the system register
    dets = [occupation_key(occ) for _, occ in state.terms]
    vec = {key ^ dets[(key & enum_mask) >> n_sys]: amp
           for key, amp in vec.items()}

    applied = [0]

    def cnot_pass(vec):
        for layer in plan.cnot_layers:
            for sys_q, id_q in layer:
                target = 1 << (n_sys + n_enum + id_q)
                vec = {key ^ (target if (key >> sys_q) & 1 else 0): amp
                       for key, amp in vec.items()}
                applied[0] += 1
        return vec

    # steps 3-4: signature into the identification register
    vec = cnot_pass(vec)

    # step 5: clear the enumeration register, conditioned on each signature
    for i, pattern in enumerate(plan.uncompute_controls):
        sig_key = int(pattern[::-1], 2) if pattern else 0
        flip = i << n_sys
        vec = {key ^ (flip if key >> (n_sys + n_enum) == sig_key else 0): amp
               for key, amp in vec.items()}

    # step 6: uncompute the signature register
    vec = cnot_pass(vec)

    target = {occupation_key(occ): amp for amp, occ in state.terms}
    sys_norm2 = sum(abs(a) ** 2 for a in target.values())
    overlap = 0j
    residual = 0.0
    total = 0.0
    for key, amp in vec.items():
        total += abs(amp) ** 2
        if key >> n_sys:
            residual += abs(amp) ** 2
        elif key in target:
            overlap += np.conj(target[key]) * amp
    fidelity = abs(overlap) ** 2 / (sys_norm2 * total) if total else 0.0
    return EncodingResult(vec, n_sys, n_enum, n_id, float(fidelity),
                          float(residual), applied[0], plan.n_uncompute_ops)


# ---------------------------------------------------------------------------
# Sequential MPS circuit
# ---------------------------------------------------------------------------

def _bond_qubits(state):
    return max(int(np.ceil(np.log2(chi))) for chi in state.bond_dims)


def _require_prepared(state):
    if state.canonical_form != "left":
        raise NotLeftCanonical("bring the MPS to left-canonical form first")
    if _left_ortho_residual(state.tensors[0]) > LEFT_ORTHO_TOL:
        raise NotLeftCanonical("the MPS must be normalized (the first site "
                               "tensor carries the norm)")


def _embedded_columns(tensor, aux_dim):
    """The isometry columns of a site unitary: column ``alpha`` (for input
    ``|alpha, 0>``) holds the site tensor slice ``A[alpha]`` as a vector over
    outputs ``|alpha_out, n> = alpha_out * d + n``."""
    chi_l, d, chi_r = tensor.shape
    cols = np.zeros((aux_dim * d, chi_l), dtype=complex)
    for alpha in range(chi_l):
        cols[:chi_r * d, alpha] = tensor[alpha].T.reshape(-1)
    return cols


def complete_gj_unitaries(state):
    """One unitary per site, the site tensor embedded in its fixed columns.

    Column ``alpha * d`` of ``G[j]`` (input ``|alpha, 0>``) is determined by
    the site tensor; the remaining columns are an orthonormal completion of
    that isometry.  All unitaries act on the same ``ceil(log2(max chi))``
    -qubit bond register together with one site, so they share a dimension.
    """
    _require_prepared(state)
    aux_dim = 2 ** _bond_qubits(state)
    d = state.local_dim
    dim = aux_dim * d
    gs = []
    for tensor in state.tensors:
        cols = _embedded_columns(tensor, aux_dim)
        fixed = [alpha * d for alpha in range(tensor.shape[0])]
        rest = [c for c in range(dim) if c not in set(fixed)]
        g = np.zeros((dim, dim), dtype=complex)
        g[:, fixed] = cols
        g[:, rest] = null_space(cols.conj().T)
        gs.append(g)
    return gs


def householder_decompose(g, tensor):
    """Reflections whose product acts as the flag-doubled site unitary.

    Returns one reflection ``1 - 2|w><w|`` per input bond value ``alpha``,
    with ``|w> = (|1>|alpha,0> - |0>|u_alpha>)/sqrt(2)`` on a space extended
    by one flag qubit (most significant).  On the span of the ``|1,alpha,0>``
    and ``|0,u_alpha>`` — the only subspace the sequential circuit ever
    occupies — the product equals ``|0><1| x G + |1><0| x G^dagger``;
    elsewhere the reflections act as the identity.
    """
    dim = g.shape[0]
    d = tensor.shape[1]
    reflections = []
    for alpha in range(tensor.shape[0]):
        w = np.zeros(2 * dim, dtype=complex)
        w[dim + alpha * d] = 1.0 / np.sqrt(2)
        w[:dim] = -g[:, alpha * d] / np.sqrt(2)
        reflections.append(np.eye(2 * dim) - 2.0 * np.outer(w, np.conj(w)))
    return reflections


@dataclass
class MpsCircuitResult:
    statevector: np.ndarray  # shape (ancilla head, d, d, ..., d)
    fidelity: float
    ancilla_residual: float
    n_gates: int


def _apply_head_site_gate(psi, op, j, head, d):
    """Apply ``op`` over (ancilla head, site j); psi axes are (head, sites)."""
    op = op.reshape(head, d, head, d)
    out = np.tensordot(op, psi, axes=([2, 3], [0, j + 1]))
    return np.moveaxis(out, 1, j + 1)


def simulate_mps_circuit(state, use_householder=False):
    """Apply the site unitaries in sequence to |0...0> and compare with the
    MPS statevector.

    With ``use_householder`` every site unitary is replaced by its reflection
    product on a flag-extended ancilla; an X gate on the flag ahead of each
    site steers the reflections onto their ``|1, alpha, 0>`` input block, and
    the flag returns to |0> at the end.
    """
    _require_prepared(state)
    d, n = state.local_dim, state.n_sites
    aux_dim = 2 ** _bond_qubits(state)
    head = (2 if use_householder else 1) * aux_dim
    if head * d ** n > MAX_CIRCUIT_DIM:
        raise BudgetExceeded("statevector too large for the circuit simulator")
    psi = np.zeros((head,) + (d,) * n, dtype=complex)
    psi[(0,) * (n + 1)] = 1.0
    gs = complete_gj_unitaries(state)
    n_gates = 0
    for j, g in enumerate(gs):
        if use_householder:
            # X on the flag qubit (most significant head bit)
            psi = np.concatenate([psi[aux_dim:], psi[:aux_dim]], axis=0)
            n_gates += 1
            for refl in householder_decompose(g, state.tensors[j]):
                psi = _apply_head_site_gate(psi, refl, j, head, d)
                n_gates += 1
        else:
            psi = _apply_head_site_gate(psi, g, j, head, d)
            n_gates += 1
    target = mps_to_statevector(state)
    block = psi.reshape(head, -1)
    overlap = np.vdot(target, block[0])
    residual = float(np.sum(np.abs(block[1:]) ** 2))
    fidelity = float(abs(overlap) ** 2
                     / (np.vdot(target, target).real
                        * np.vdot(psi, psi).real))
    return MpsCircuitResult(psi, fidelity, residual, n_gates)
