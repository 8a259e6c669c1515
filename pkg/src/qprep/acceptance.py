"""Reproduction suite: every headline number re-derived in one run.

Ten numbered checks cover the package end to end: the Gaussian refining
case study, the signature-compression properties, exact encoder and MPS
circuit simulations, the resource formulas, the energy-distribution
identities, kernel-density error scaling, min-of-K statistics, the leakage
bracket, and the integral-file pipeline against an independent
ladder-operator oracle.  Each check returns a one-line verdict; ``run_all``
prints them in order.  Checks with a stated time budget fail when they
exceed it.
"""

import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import gf2, resources
from .encodesim import (complete_gj_unitaries, householder_decompose,
                        simulate_mps_circuit, simulate_sos_encoding)
from .hamiltonian import (DenseHamiltonian, build_ci_matrix, normalize_spectrum,
                          parse_fcidump)
from .leakage import (LeakageSetup, leak_prob_exact, leak_prob_level_approx,
                      leak_prob_level_bracket)
from .qpestats import qpe_outcome_distribution
from .refine import gaussian_case_study, gaussian_levels
from .spectra import (BroadKernel, SpectralMeasure, broaden, default_grid,
                      edgeworth, edgeworth_terms, exact_spectral_measure,
                      gram_charlier, gram_charlier_coefficient, kde, moments,
                      resolvent_distribution)
from .states import (MpsState, SosState, left_canonicalize,
                     occupation_from_spatial)


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return "[%s] %2d %-24s %s (%.1fs)" % (status, self.number,
                                              self.name, self.detail,
                                              self.elapsed)


def _finish(number, name, t0, passed, detail, budget=None):
    elapsed = time.time() - t0
    if budget is not None and elapsed >= budget:
        passed = False
        detail += "; exceeded %ds budget" % budget
    return CheckResult(number, name, bool(passed), detail, elapsed)


# ---------------------------------------------------------------------------
# 1. Gaussian refining case study
# ---------------------------------------------------------------------------

def check_gaussian_case_study():
    t0 = time.time()
    report = gaussian_case_study()
    worst = max(abs(r.computed - r.reference) / abs(r.reference)
                for r in report.rows if r.rel_tol is not None)
    detail = "12 rows, worst rel dev %.1f%%" % (100 * worst)
    return _finish(1, "gaussian-case-study", t0, report.all_passed, detail,
                   budget=60)


# ---------------------------------------------------------------------------
# 2. Signature compression properties
# ---------------------------------------------------------------------------

def _random_distinct_bitstrings(rng, count, n_bits):
    seen = set()
    while len(seen) < count:
        seen.add("".join(rng.choice(["0", "1"], size=n_bits)))
    return sorted(seen)


def check_signature_compression():
    t0 = time.time()
    rng = np.random.default_rng(20260815)
    max_scan = 0
    for _ in range(1000):
        d = int(rng.integers(2, 65))
        n_bits = 2 * int(rng.integers(3, 21))
        nus = _random_distinct_bitstrings(rng, d, n_bits)
        smap = gf2.compress(nus)
        bound = gf2.signature_length(d)
        if len(set(smap.signatures)) != d or smap.signature_bits > bound:
            return _finish(2, "signature-compression", t0, False,
                           "distinctness or length violated at D=%d" % d)
        _, tilde = gf2.select_substrings(nus)
        stats = {}
        gf2.find_signature_vectors(tilde, stats=stats)
        budget = d * d // 2 + d + 1
        counts = stats.get("search_counts", [])
        if any(c > budget for c in counts):
            return _finish(2, "signature-compression", t0, False,
                           "search budget exceeded at D=%d" % d)
        if counts:
            max_scan = max(max_scan, max(counts))
    detail = "1000 instances, max candidate scan %d" % max_scan
    return _finish(2, "signature-compression", t0, True, detail, budget=60)


# ---------------------------------------------------------------------------
# 3. Exact sum-of-Slater encoder simulation
# ---------------------------------------------------------------------------

def _h6_three_determinant_state():
    return SosState(12, [
        (0.86, occupation_from_spatial("222000")),
        (-0.36, occupation_from_spatial("b2aa0b")),
        (-0.36, occupation_from_spatial("a2bb0a")),
    ]).normalize()


def check_sos_encoding():
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst_fid, worst_res = 1.0, 0.0
    cases = []
    for _ in range(50):
        n_so = 2 * int(rng.integers(2, 7))
        d = int(rng.integers(1, 17))
        occs = _random_distinct_bitstrings(rng, d, n_so)
        amps = rng.normal(size=d) + 1j * rng.normal(size=d)
        cases.append(SosState(n_so, list(zip(amps, occs))).normalize())
    cases.append(_h6_three_determinant_state())
    for state in cases:
        res = simulate_sos_encoding(state)
        worst_fid = min(worst_fid, res.fidelity)
        worst_res = max(worst_res, res.ancilla_residual)
    passed = worst_fid >= 1 - 1e-10 and worst_res < 1e-20
    detail = ("51 states, min fidelity 1-%.1e, max ancilla residual %.1e"
              % (1 - worst_fid, worst_res))
    return _finish(3, "sos-encoding", t0, passed, detail)


# ---------------------------------------------------------------------------
# 4. MPS circuit with Householder reflections
# ---------------------------------------------------------------------------

def _random_canonical_mps(rng, chis, d=4):
    dims = [1] + list(chis) + [1]
    tensors = []
    for j in range(len(dims) - 1):
        shape = (dims[j], d, dims[j + 1])
        tensors.append(rng.normal(size=shape) + 1j * rng.normal(size=shape))
    state = left_canonicalize(MpsState(tensors))
    t0 = state.tensors[0] / state.norm()
    return MpsState([t0] + list(state.tensors[1:]), state.local_dim,
                    canonical_form="left")


def _reflection_product_residual(state):
    worst = 0.0
    for g, tensor in zip(complete_gj_unitaries(state), state.tensors):
        dim = g.shape[0]
        d = state.local_dim
        prod = np.eye(2 * dim)
        for refl in householder_decompose(g, tensor):
            prod = refl @ prod
        doubled = np.zeros((2 * dim, 2 * dim), dtype=complex)
        doubled[:dim, dim:] = g
        doubled[dim:, :dim] = g.conj().T
        for alpha in range(tensor.shape[0]):
            flagged = np.zeros(2 * dim)
            flagged[dim + alpha * d] = 1.0
            worst = max(worst,
                        float(np.max(np.abs((prod - doubled) @ flagged))))
    return worst


def check_mps_circuit():
    t0 = time.time()
    rng = np.random.default_rng(11)
    worst_fid, worst_ref = 1.0, 0.0
    for _ in range(25):
        n_sites = int(rng.integers(2, 6))
        chis = [int(rng.integers(1, 5)) for _ in range(n_sites - 1)]
        state = _random_canonical_mps(rng, chis)
        res = simulate_mps_circuit(state, use_householder=True)
        worst_fid = min(worst_fid, res.fidelity)
        worst_ref = max(worst_ref, _reflection_product_residual(state))
    passed = worst_fid >= 1 - 1e-10 and worst_ref < 1e-8
    detail = ("25 states, min fidelity 1-%.1e, max reflection residual %.1e"
              % (1 - worst_fid, worst_ref))
    return _finish(4, "mps-circuit", t0, passed, detail)


# ---------------------------------------------------------------------------
# 5. Resource formulas
# ---------------------------------------------------------------------------

def check_resource_formulas():
    t0 = time.time()
    point = resources.sos_cost_basic(3, 2 ** 10)
    point_ok = point.toffoli == 23552 and point.clean_qubits - 6 == 47

    # proposed cost below the iterative one for every determinant count
    # whose per-determinant coefficient stays under 2N-1 = 199; both costs
    # are linear in D between consecutive powers of two, so the block
    # endpoints decide the whole block
    sweep_ok = True
    prior_coeff = 2 * 100 - 1
    dets = list(range(2, 4097))
    for j in range(12, 97):
        dets += [2 ** j, 2 ** j + 1, 2 ** (j + 1) - 1]
    dets.append(2 ** 97)
    for d in dets:
        ell = (d - 1).bit_length()
        if 2 * ell + 3 >= prior_coeff:
            continue
        if resources.sos_cost_basic(100, d).toffoli \
                >= resources.sos_cost_prior(100, d).toffoli:
            sweep_ok = False
            break

    # the order-of-magnitude claim at D=2^40 depends on how "400 orbitals"
    # is read; the spatial reading gives the claimed factor of ten
    d40 = 2 ** 40
    spatial = (resources.sos_cost_prior(400, d40).toffoli
               / resources.sos_cost_basic(400, d40).toffoli)
    spin = (resources.sos_cost_prior(200, d40).toffoli
            / resources.sos_cost_basic(200, d40).toffoli)
    tenx_ok = 8.0 <= spatial <= 12.0
    passed = point_ok and sweep_ok and tenx_ok
    detail = ("D=2^10 exact; crossover sweep ok; 10x ratio %.1f spatial "
              "(%.1f spin-orbital reading)" % (spatial, spin))
    return _finish(5, "resource-formulas", t0, passed, detail)


# ---------------------------------------------------------------------------
# 6. Energy-distribution identities
# ---------------------------------------------------------------------------

_HERMITE_COEFF_TABLE = {
    3: {3: Fraction(-1, 6)},
    4: {4: Fraction(1, 24), 0: Fraction(-3, 24)},
    5: {5: Fraction(-1, 120), 3: Fraction(10, 120)},
    6: {6: Fraction(1, 720), 4: Fraction(-15, 720), 0: Fraction(30, 720)},
    7: {7: Fraction(-1, 5040), 5: Fraction(21, 5040),
        3: Fraction(-105, 5040)},
    8: {8: Fraction(1, 40320), 6: Fraction(-28, 40320),
        4: Fraction(210, 40320), 0: Fraction(-315, 40320)},
}

_CUMULANT_TERM_TABLE = {
    1: {3: {(3,): Fraction(1, 6)}},
    2: {4: {(4,): Fraction(1, 24)}, 6: {(3, 3): Fraction(1, 72)}},
    3: {5: {(5,): Fraction(1, 120)}, 7: {(3, 4): Fraction(1, 144)},
        9: {(3, 3, 3): Fraction(1, 1296)}},
    4: {6: {(6,): Fraction(1, 720)},
        8: {(3, 5): Fraction(1, 720), (4, 4): Fraction(1, 1152)},
        10: {(3, 3, 4): Fraction(1, 1728)},
        12: {(3, 3, 3, 3): Fraction(1, 31104)}},
    5: {7: {(7,): Fraction(1, 5040)},
        9: {(3, 6): Fraction(1, 4320), (4, 5): Fraction(1, 2880)},
        11: {(3, 3, 5): Fraction(1, 8640), (3, 4, 4): Fraction(1, 6912)},
        13: {(3, 3, 3, 4): Fraction(1, 31104)},
        15: {(3, 3, 3, 3, 3): Fraction(1, 933120)}},
}


def check_distribution_identities():
    t0 = time.time()
    tables_ok = all(gram_charlier_coefficient(n) == row
                    for n, row in _HERMITE_COEFF_TABLE.items())
    tables_ok = tables_ok and all(edgeworth_terms(s) == terms
                                  for s, terms in
                                  _CUMULANT_TERM_TABLE.items())
    rng = np.random.default_rng(19)
    worst_res, worst_series = 0.0, 0.0
    for trial in range(20):
        dim = int(rng.integers(2, 65))
        mat = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        h, _ = normalize_spectrum(DenseHamiltonian((mat + mat.conj().T) / 2))
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
        measure = exact_spectral_measure(h, psi)
        grid, direct = broaden(measure, BroadKernel("lorentzian", 0.05))
        method = "complex" if trial % 2 == 0 else "real"
        _, vals = resolvent_distribution(h, psi, 0.05, grid, method=method)
        worst_res = max(worst_res, float(np.max(np.abs(vals - direct))))
        ms = moments(h, psi, 8)
        gc = gram_charlier(ms, 8)
        ew = edgeworth(ms, 6, hermite_cap=8)
        dev = max(float(np.max(np.abs(gc.hermite_weights
                                      - ew.hermite_weights))),
                  float(np.max(np.abs(gc(default_grid())
                                      - ew(default_grid())))))
        worst_series = max(worst_series, dev)
    passed = tables_ok and worst_res < 1e-8 and worst_series < 1e-12
    detail = ("tables symbolic ok; resolvent dev %.1e; series dev %.1e"
              % (worst_res, worst_series))
    return _finish(6, "distribution-identities", t0, passed, detail)


# ---------------------------------------------------------------------------
# 7. Kernel-density error scaling
# ---------------------------------------------------------------------------

def check_kde_scaling():
    t0 = time.time()
    from scipy.stats import norm
    rng = np.random.default_rng(7)
    grid = np.linspace(0.0, 1.0, 401)
    target = norm.pdf(grid, 0.5, 0.1)
    sizes = [100, 1000, 10_000, 100_000]
    reps = {100: 8, 1000: 6, 10_000: 4, 100_000: 3}
    mises = []
    for m in sizes:
        errs = []
        for _ in range(reps[m]):
            samples = rng.normal(0.5, 0.1, size=m)
            _, est = kde(samples, grid=grid)
            errs.append(np.trapezoid((est - target) ** 2, grid))
        mises.append(np.mean(errs))
    slope = float(np.polyfit(np.log(sizes), np.log(mises), 1)[0])
    passed = abs(slope + 0.8) <= 0.15
    detail = "MISE slope %.3f over M in 1e2..1e5" % slope
    return _finish(7, "kde-scaling", t0, passed, detail, budget=120)


# ---------------------------------------------------------------------------
# 8. Min-of-K statistics
# ---------------------------------------------------------------------------

def check_min_of_k():
    t0 = time.time()
    dist = qpe_outcome_distribution(gaussian_levels(0.06, 0.02, 1024), 6)
    analytic = np.cumsum(dist.probs)
    rng = np.random.default_rng(8)
    trials = 10_000
    worst = 0.0
    for n_reps in (1, 5, 20):
        draws = rng.choice(dist.probs.size, size=(trials, n_reps),
                           p=dist.probs)
        mins = draws.min(axis=1)
        empirical = np.cumsum(np.bincount(mins,
                                          minlength=dist.probs.size)) / trials
        ks = float(np.max(np.abs(empirical
                                 - (1 - (1 - analytic) ** n_reps))))
        worst = max(worst, ks)
    passed = worst < 0.02
    detail = "max KS distance %.4f at 10^4 trials, K in {1,5,20}" % worst
    return _finish(8, "min-of-k", t0, passed, detail)


# ---------------------------------------------------------------------------
# 9. Leakage bracket and monotonicity
# ---------------------------------------------------------------------------

def check_leakage_bracket():
    t0 = time.time()
    rng = np.random.default_rng(71)
    checked = 0
    while checked < 100:
        k = int(rng.integers(6, 13))
        size = 2 ** k
        e0 = float(rng.uniform(0.0, 0.05))
        eps = float(rng.uniform(1.5 / size, 0.03))
        setup = LeakageSetup(k, eps, e0)
        x_n = int(rng.integers(max(setup.x_upper + 2, 1),
                               max(setup.x_upper + 3,
                                   int(0.4 * size ** (2 / 3)))))
        delta = float(rng.uniform(0.05, 0.95))
        center = x_n + delta
        gap = center - setup.x_upper
        if setup.x_upper < -2 * center:
            continue
        if math.tan(math.pi * center / size) * gap * (gap + 1) \
                > 0.5 * size / math.pi:
            continue
        checked += 1
        lo, hi = leak_prob_level_bracket(center / size, setup)
        approx = leak_prob_level_approx(center / size, setup)
        if not lo - 1e-15 <= approx <= hi + 1e-15:
            return _finish(9, "leakage-bracket", t0, False,
                           "approximation left the bracket at k=%d" % k)

    monotone = True
    for seed in (0, 1, 2):
        srng = np.random.default_rng(seed)
        levels = np.sort(srng.uniform(0.05, 0.45, 12))
        weights = srng.dirichlet(np.ones(12))
        m = SpectralMeasure(list(zip(levels, weights)))
        values = [leak_prob_exact(m, LeakageSetup(k, 0.01, 0.02))
                  for k in range(4, 13)]
        if any(b > a + 1e-15 for a, b in zip(values, values[1:])):
            monotone = False
    passed = monotone
    detail = "100 bracketed configs; exact leak nonincreasing in k"
    return _finish(9, "leakage-bracket", t0, passed, detail)


# ---------------------------------------------------------------------------
# 10. Integral-file pipeline against a ladder-operator oracle
# ---------------------------------------------------------------------------

TWO_ORBITAL_FCIDUMP = """&FCI NORB=2,NELEC=2,MS2=0,
 ORBSYM=1,1,
 ISYM=1,
&END
 0.2 1 1 1 1
 0.1 2 1 1 1
-1.0 1 1 0 0
-0.5 2 2 0 0
 0.7 0 0 0 0
"""


def _ladder_operator_matrix(n_orb, core_energy, one_body, two_body):
    """Dense second-quantized Hamiltonian built from raw ladder operators.

    Spin-orbital s = 2p (up) / 2p+1 (down) is bit s; fermionic signs come
    from the parity of the occupied bits below each site.  Entirely
    independent of the determinant-pair rules used by the CI builder.
    """
    n_so = 2 * n_orb
    dim = 1 << n_so
    popcnt = np.array([bin(x).count("1") for x in range(dim)],
                      dtype=np.int64)
    h_full = core_energy * np.eye(dim)
    idx = np.arange(dim, dtype=np.int64)

    def ladder(states, amps, orig, s, create):
        bit = 1 << s
        occupied = (states & bit) != 0
        keep = ~occupied if create else occupied
        states, amps, orig = states[keep], amps[keep], orig[keep]
        amps = amps * np.where(popcnt[states & (bit - 1)] & 1, -1.0, 1.0)
        return states ^ bit, amps, orig

    def accumulate(coeff, op_string):
        states, amps, orig = idx, np.ones(dim), idx
        for kind, s in op_string[::-1]:
            states, amps, orig = ladder(states, amps, orig, s, kind == "c")
        np.add.at(h_full, (states, orig), coeff * amps)

    for p in range(n_orb):
        for q in range(n_orb):
            if one_body[p, q] == 0.0:
                continue
            for sigma in (0, 1):
                accumulate(one_body[p, q],
                           [("c", 2 * p + sigma), ("a", 2 * q + sigma)])
    for p in range(n_orb):
        for q in range(n_orb):
            for r in range(n_orb):
                for s in range(n_orb):
                    gv = two_body[p, q, r, s]
                    if gv == 0.0:
                        continue
                    for sigma in (0, 1):
                        for tau in (0, 1):
                            accumulate(0.5 * gv,
                                       [("c", 2 * p + sigma),
                                        ("c", 2 * r + tau),
                                        ("a", 2 * s + tau),
                                        ("a", 2 * q + sigma)])
    return h_full


def check_fcidump_pipeline():
    t0 = time.time()
    fd = parse_fcidump(TWO_ORBITAL_FCIDUMP)
    full = _ladder_operator_matrix(fd.n_orb, fd.core_energy, fd.one_body,
                                   fd.two_body)
    worst = 0.0
    for n_alpha, n_beta in ((1, 1), (1, 0), (2, 1)):
        ci = build_ci_matrix(fd, n_alpha, n_beta)
        states = [int(label[::-1], 2) for label in ci.basis_labels]
        block = full[np.ix_(states, states)]
        worst = max(worst, float(np.max(np.abs(ci.entries - block))))
    passed = worst < 1e-12
    detail = "max |CI - ladder oracle| = %.1e over 3 sectors" % worst
    return _finish(10, "fcidump-pipeline", t0, passed, detail)


def h6_protocol_report(fcidump_text):
    """Qualitative checks on a user-supplied six-orbital integral file.

    Builds the half-filled singlet CI block and inspects the ground state:
    correlation must lower the energy below the best single determinant,
    one determinant must dominate, and the next two amplitudes should form
    the familiar equal-magnitude pair of opposite sign to the leader.
    """
    fd = parse_fcidump(fcidump_text)
    if fd.n_orb != 6:
        raise ValueError("expected a six-orbital integral file, got %d"
                         % fd.n_orb)
    ci = build_ci_matrix(fd, 3, 3)
    eigenvalues, vectors = ci.eigensystem()
    ground = vectors[:, 0]
    order = np.argsort(-np.abs(ground))
    lead, second, third = (ground[order[0]], ground[order[1]],
                           ground[order[2]])
    # fix the global phase so the leader is positive
    if lead.real < 0:
        lead, second, third = -lead, -second, -third
    pair_balanced = (abs(abs(second) - abs(third))
                     <= 0.2 * max(abs(second), abs(third)))
    pair_opposed = second.real < 0 and third.real < 0
    return {
        "ground_energy": float(eigenvalues[0]),
        "lowest_diagonal": float(np.min(np.diag(ci.entries).real)),
        "correlation_lowers_energy":
            bool(eigenvalues[0] < np.min(np.diag(ci.entries).real) - 1e-12),
        "dominant_weight": float(abs(lead) ** 2),
        "dominant_label": ci.basis_labels[order[0]],
        "top_amplitudes": [float(lead.real), float(second.real),
                           float(third.real)],
        "pair_structure": bool(pair_balanced and pair_opposed),
    }


CHECKS = (
    check_gaussian_case_study,
    check_signature_compression,
    check_sos_encoding,
    check_mps_circuit,
    check_resource_formulas,
    check_distribution_identities,
    check_kde_scaling,
    check_min_of_k,
    check_leakage_bracket,
    check_fcidump_pipeline,
)


def run_all(stream=None):
    """Run every check, printing one verdict line each; returns the list."""
    results = []
    for check in CHECKS:
        result = check()
        results.append(result)
        if stream is not None:
            print(result.line(), file=stream, flush=True)
    return results


if __name__ == "__main__":
    outcome = run_all(stream=sys.stdout)
    sys.exit(0 if all(r.passed for r in outcome) else 1)
