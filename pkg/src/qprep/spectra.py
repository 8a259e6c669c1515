"""Energy distributions of a state with respect to a Hamiltonian.

A :class:`SpectralMeasure` is the exact, discrete distribution of a state's
overlaps with the eigenbasis.  Around it this module provides four routes to
a (possibly broadened) energy density and the machinery shared by the QPE
statistics modules:

* kernel broadening of the exact measure (Gaussian, Lorentzian, or the
  periodic QPE kernel);
* moment/cumulant series (Gram-Charlier and Edgeworth), with exact rational
  coefficient tables;
* the resolvent (Green's function) route, by direct linear solves — both the
  complex form and the real-symmetric companion system;
* coarse phase-estimation sampling with a random sub-bin offset per shot,
  plus Gaussian kernel density estimation for smoothing.

All energies are expected in the normalized frame (spectrum inside [0, 1],
see :func:`qprep.hamiltonian.normalize_spectrum`); phase-estimation
arithmetic treats energy modulo 1.  The measure container itself accepts
levels half a period beyond either edge so that idealized model densities
(e.g. a Gaussian tail crossing zero) can be represented.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import hermite_e

from .hamiltonian import AffineNormalizer, DenseHamiltonian

PROB_SUM_TOL = 1e-10
ENERGY_LO, ENERGY_HI = -0.5, 1.5
GRID_POINTS = 512
SPIKE_TOL = 1e-12
SOLVE_RESIDUAL_TOL = 1e-10
GC_TABLE_MAX = 8


class OrderUnsupported(ValueError):
    """Gram-Charlier order beyond the closed-form coefficient table."""


class SolverFailure(RuntimeError):
    """A resolvent linear solve did not reach the required residual."""


def default_grid(n_points=GRID_POINTS):
    """Standard energy grid: [-0.05, 1.05] covers the periodic domain with
    margin."""
    return np.linspace(-0.05, 1.05, n_points)


# ---------------------------------------------------------------------------
# The exact measure and kernel broadening
# ---------------------------------------------------------------------------

@dataclass
class SpectralMeasure:
    """Discrete energy distribution: ``levels`` is a list of (E_n, p_n).

    Energies ascend and the weights sum to one.  ``normalizer`` optionally
    records the affine map that brought the energies into the normalized
    frame, so raw energies stay recoverable.
    """

    levels: list
    normalizer: AffineNormalizer = None

    def __post_init__(self):
        self.levels = [(float(e), float(p)) for e, p in self.levels]
        if not self.levels:
            raise ValueError("a measure needs at least one level")
        es = np.array([e for e, _ in self.levels])
        ps = np.array([p for _, p in self.levels])
        if np.any(np.diff(es) < 0):
            raise ValueError("levels must be sorted by energy")
        if np.any(ps < -PROB_SUM_TOL):
            raise ValueError("negative level weight")
        if abs(ps.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError("level weights must sum to 1")
        if es[0] < ENERGY_LO or es[-1] > ENERGY_HI:
            raise ValueError(
                f"energies must lie within [{ENERGY_LO}, {ENERGY_HI}] "
                "(normalized frame, half a period of margin)")

    @property
    def energies(self):
        return np.array([e for e, _ in self.levels])

    @property
    def probs(self):
        return np.array([p for _, p in self.levels])

    def mean(self):
        return float(np.dot(self.probs, self.energies))

    def variance(self):
        e, p = self.energies, self.probs
        return float(np.dot(p, e ** 2) - np.dot(p, e) ** 2)


@dataclass
class BroadKernel:
    """Unit-integral broadening kernel centered at zero.

    ``kind`` is "gaussian" or "lorentzian" with ``width`` the scale eta, or
    "qpe_sinc" with ``width`` the integer digit count k (normalized over one
    period of the phase-estimation comb).
    """

    kind: str
    width: float

    def __post_init__(self):
        if self.kind not in ("gaussian", "lorentzian", "qpe_sinc"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "qpe_sinc":
            if self.width != int(self.width) or self.width < 1:
                raise ValueError("qpe_sinc width is a digit count >= 1")
        elif self.width <= 0:
            raise ValueError("kernel width must be positive")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            eta = self.width
            return np.exp(-0.5 * (x / eta) ** 2) / (eta * np.sqrt(2 * np.pi))
        if self.kind == "lorentzian":
            eta = self.width
            return (eta / np.pi) / (x ** 2 + eta ** 2)
        m = 2 ** int(self.width)
        out = np.full(x.shape, float(m))
        off = np.abs(x - np.round(x)) >= SPIKE_TOL
        xo = x[off]
        out[off] = (np.sin(np.pi * m * xo) ** 2
                    / np.sin(np.pi * xo) ** 2) / m
        return out


def exact_spectral_measure(h, psi, normalizer=None):
    """Overlap weights of ``psi`` with the eigenbasis of ``h``.

    ``h`` is a DenseHamiltonian (or a Hermitian matrix) already in the
    normalized frame; ``psi`` need not be normalized.
    """
    if not isinstance(h, DenseHamiltonian):
        h = DenseHamiltonian(h)
    evals, evecs = h.eigensystem()
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot take the measure of the zero state")
    ps = np.abs(evecs.conj().T @ (psi / nrm)) ** 2
    return SpectralMeasure(list(zip(evals, ps)), normalizer)


def broaden(measure, kernel, grid=None):
    """Place a copy of ``kernel`` at each level: P(E) = sum_n p_n f(E_n - E).

    Returns (grid, density values).
    """
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    vals = kernel.evaluate(measure.energies[:, None] - grid[None, :])
    return grid, measure.probs @ vals


def discretize_density(grid, values, n_levels=4096, normalizer=None):
    """Bin a sampled density into a discrete measure by trapezoid mass.

    ``n_levels`` equal-width bins span the grid; each level sits at its bin
    center and carries the trapezoid integral over the bin, renormalized.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    edges = np.linspace(grid[0], grid[-1], n_levels + 1)
    at_edges = np.interp(edges, grid, values)
    mass = 0.5 * (at_edges[:-1] + at_edges[1:]) * np.diff(edges)
    total = mass.sum()
    if total <= 0:
        raise ValueError("density has no mass on the grid")
    centers = 0.5 * (edges[:-1] + edges[1:])
    return SpectralMeasure(list(zip(centers, mass / total)), normalizer)


def as_measure(m, n_levels=4096):
    """Coerce a measure-or-density argument into a SpectralMeasure.

    A SpectralMeasure passes through; a ``(grid, values)`` pair is binned
    into ``n_levels`` point masses first.
    """
    if isinstance(m, SpectralMeasure):
        return m
    grid, values = m
    return discretize_density(np.asarray(grid, dtype=float),
                              np.asarray(values, dtype=float),
                              n_levels=n_levels)


# ---------------------------------------------------------------------------
# Moments and cumulants
# ---------------------------------------------------------------------------

@dataclass
class MomentSet:
    """Raw moments <E^n> plus the standardized moment/cumulant ladder.

    ``raw[n]`` is the n-th raw moment in the (normalized-energy) frame it
    was computed in; ``mu`` and ``kappa`` are the moments and cumulants of
    the shifted/rescaled variable (E - mean)/sigma, so mu[1] = 0 and
    mu[2] = 1.  For a zero-spread (single-level) input the standardized
    entries are None.
    """

    raw: list
    mean: float
    sigma: float
    mu: list
    kappa: list

    @property
    def n_max(self):
        return len(self.raw) - 1

    def __post_init__(self):
        if self.mu is not None:
            if abs(self.mu[1]) > 1e-9 or abs(self.mu[2] - 1) > 1e-9:
                raise ValueError("standardized moments need mu1=0, mu2=1")

    @classmethod
    def from_raw(cls, raw):
        raw = [float(m) for m in raw]
        if not raw or abs(raw[0] - 1.0) > 1e-12:
            raise ValueError("raw[0] must be 1")
        mean = raw[1] if len(raw) > 1 else 0.0
        var = raw[2] - mean ** 2 if len(raw) > 2 else 0.0
        if var < -1e-12:
            raise ValueError("negative variance")
        sigma = math.sqrt(max(var, 0.0))
        if sigma == 0.0 or len(raw) < 3:
            return cls(raw, mean, sigma, None, None)
        mu = [1.0, 0.0, 1.0]
        for n in range(3, len(raw)):
            c = sum(math.comb(n, i) * raw[i] * (-mean) ** (n - i)
                    for i in range(n + 1))
            mu.append(c / sigma ** n)
        kappa = [0.0, 0.0, 1.0]
        for n in range(3, len(raw)):
            k = mu[n] - sum(math.comb(n - 1, j - 1) * kappa[j] * mu[n - j]
                            for j in range(1, n))
            kappa.append(k)
        return cls(raw, mean, sigma, mu, kappa)


def moments(h, psi, n_max):
    """Raw moments <psi|H^n|psi> by repeated matrix-vector application.

    Compute in the normalized frame (see module docstring) so high powers
    stay well-scaled.
    """
    if not isinstance(h, DenseHamiltonian):
        h = DenseHamiltonian(h)
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    raw = [1.0]
    cur = psi
    for _ in range(n_max):
        cur = h.entries @ cur
        raw.append(float(np.vdot(psi, cur).real))
    return MomentSet.from_raw(raw)


def moments_from_measure(measure, n_max):
    """Raw moments as direct power sums over a discrete measure."""
    e, p = measure.energies, measure.probs
    raw = [float(np.dot(p, e ** n)) for n in range(n_max + 1)]
    return MomentSet.from_raw(raw)


# ---------------------------------------------------------------------------
# Hermite series: Gram-Charlier and Edgeworth
# ---------------------------------------------------------------------------

def hermite_e_coefficients(n):
    """Integer power-basis coefficients of the probabilists' He_n."""
    if n == 0:
        return [1]
    prev, cur = [1], [0, 1]
    for m in range(1, n):
        nxt = [0] * (m + 2)
        nxt[1:] = cur
        for j, a in enumerate(prev):
            nxt[j] -= m * a
        prev, cur = cur, nxt
    return cur


def gram_charlier_coefficient(n):
    """Exact series coefficient c_n as a map {moment order: Fraction}.

    c_n = ((-1)^n / n!) <He_n>, written in standardized moments (mu1 = 0 and
    mu2 = 1 substituted); key 0 holds the constant term.
    """
    if n < 3:
        raise ValueError("series coefficients start at order 3")
    sign = (-1) ** n
    fact = math.factorial(n)
    coeffs = hermite_e_coefficients(n)
    out = {}
    const = coeffs[0] + (coeffs[2] if n >= 2 else 0)
    if const:
        out[0] = Fraction(sign * const, fact)
    for j in range(3, n + 1):
        if coeffs[j]:
            out[j] = Fraction(sign * coeffs[j], fact)
    return out


def _partitions(s):
    """Multiplicity vectors {k_m} with sum(m * k_m) = s, m from 1 to s."""
    sols = []

    def rec(m, remaining, current):
        if m > remaining:
            if remaining == 0:
                sols.append(dict(current))
            return
        for k in range(remaining // m + 1):
            if k:
                current[m] = k
            rec(m + 1, remaining - m * k, current)
            current.pop(m, None)

    rec(1, s, {})
    return sols


def edgeworth_terms(s):
    """Exact s-th Edgeworth term: {Hermite order: {cumulant tuple: Fraction}}.

    Each cumulant tuple lists the orders of the kappa factors in the
    monomial (sorted, with multiplicity).
    """
    if s < 1:
        raise ValueError("terms start at s = 1")
    out = {}
    for sol in _partitions(s):
        r = sum(sol.values())
        he = s + 2 * r
        coeff = Fraction(1)
        mono = []
        for m, k in sorted(sol.items()):
            coeff /= math.factorial(k) * math.factorial(m + 2) ** k
            mono.extend([m + 2] * k)
        out.setdefault(he, {})[tuple(mono)] = coeff
    return out


@dataclass
class SeriesDensity:
    """Gaussian-times-Hermite-series density evaluator.

    ``hermite_weights[n]`` multiplies He_n in the standardized variable
    x = (E - mean)/sigma; evaluation at an energy divides by sigma so the
    result is a density in E.
    """

    hermite_weights: np.ndarray
    mean: float
    sigma: float
    kind: str = "series"

    def standardized(self, x):
        x = np.asarray(x, dtype=float)
        envelope = np.exp(-0.5 * x ** 2) / np.sqrt(2 * np.pi)
        return envelope * hermite_e.hermeval(x, self.hermite_weights)

    def __call__(self, energy):
        x = (np.asarray(energy, dtype=float) - self.mean) / self.sigma
        return self.standardized(x) / self.sigma


def _require_standardized(ms):
    if ms.mu is None:
        raise ValueError("series need a spread-out measure (sigma > 0)")


def gram_charlier(ms, order, generic=False):
    """Gram-Charlier density up to Hermite order ``order``.

    Coefficients come from the closed-form table through order 8; pass
    ``generic=True`` to project onto higher Hermite orders directly from the
    moment ladder (requires moments up to that order).
    """
    _require_standardized(ms)
    if order < 2:
        raise ValueError("order must be at least 2")
    if order > GC_TABLE_MAX and not generic:
        raise OrderUnsupported(
            f"closed-form coefficients stop at order {GC_TABLE_MAX}; "
            "pass generic=True for the Hermite-projection path")
    if order > ms.n_max:
        raise ValueError("not enough moments for the requested order")
    weights = np.zeros(order + 1)
    weights[0] = 1.0
    for n in range(3, order + 1):
        coeffs = hermite_e_coefficients(n)
        mean_he = coeffs[0] + coeffs[2] + sum(
            coeffs[j] * ms.mu[j] for j in range(3, n + 1))
        weights[n] = mean_he / math.factorial(n)
    return SeriesDensity(weights, ms.mean, ms.sigma, "gram-charlier")


def edgeworth(ms, s_max, hermite_cap=None):
    """Edgeworth density with terms s = 1 .. s_max.

    ``hermite_cap`` drops the Hermite orders above it, which regroups the
    series back into a Gram-Charlier truncation (the two expansions carry
    identical terms, arranged differently).
    """
    _require_standardized(ms)
    if s_max < 0:
        raise ValueError("s_max must be nonnegative")
    if s_max + 2 > ms.n_max:
        raise ValueError("s_max needs cumulants up to order s_max + 2")
    top = 3 * s_max if hermite_cap is None else hermite_cap
    weights = np.zeros(max(top, 0) + 1)
    weights[0] = 1.0
    for s in range(1, s_max + 1):
        for he, monos in edgeworth_terms(s).items():
            if he > top:
                continue
            for mono, coeff in monos.items():
                term = float(coeff)
                for order in mono:
                    term *= ms.kappa[order]
                weights[he] += term
    return SeriesDensity(weights, ms.mean, ms.sigma, "edgeworth")


# ---------------------------------------------------------------------------
# Resolvent route
# ---------------------------------------------------------------------------

def resolvent_distribution(h, psi, eta, grid=None, method="complex"):
    """P(E) = -(1/pi) Im <psi|(H - E + i eta)^{-1}|psi> on a grid.

    ``method`` "complex" solves the defining system directly; "real" solves
    the Hermitian companion system [(H-E)^2 + eta^2] Y = -(eta/pi) psi and
    reads Im G = <psi|Y>.  Both raise SolverFailure when a solve's residual
    exceeds 1e-10.
    """
    if method not in ("complex", "real"):
        raise ValueError("method must be 'complex' or 'real'")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if not isinstance(h, DenseHamiltonian):
        h = DenseHamiltonian(h)
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    a = h.entries
    eye = np.eye(h.dim)
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    out = np.empty(grid.shape)
    for i, e in enumerate(grid):
        if method == "complex":
            mat = a - (e - 1j * eta) * eye
            rhs = psi
        else:
            shifted = a - e * eye
            mat = shifted @ shifted + eta ** 2 * eye
            rhs = -(eta / np.pi) * psi
        try:
            sol = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure(f"linear solve failed at E={e}: {exc}")
        residual = np.linalg.norm(mat @ sol - rhs)
        if residual > SOLVE_RESIDUAL_TOL:
            raise SolverFailure(
                f"residual {residual:.3g} at E={e} exceeds "
                f"{SOLVE_RESIDUAL_TOL}")
        if method == "complex":
            out[i] = -np.vdot(psi, sol).imag / np.pi
        else:
            out[i] = -np.vdot(psi, sol).real
    return grid, out


# ---------------------------------------------------------------------------
# Coarse phase-estimation sampling and KDE
# ---------------------------------------------------------------------------

def qpe_kernel_probs(energy, k):
    """Distribution of the k-digit integer outcome for a sharp energy.

    probs[x] = 2^{-2k} sin^2(pi 2^k E) / sin^2(pi [E - x/2^k]); an energy
    sitting exactly on the outcome grid gets the Kronecker spike.  Periodic
    in the energy with period 1.
    """
    m = 2 ** k
    me = m * float(energy)
    probs = np.zeros(m)
    if abs(me - round(me)) < SPIKE_TOL:
        probs[int(round(me)) % m] = 1.0
        return probs
    xs = np.arange(m)
    probs = (np.sin(np.pi * me) ** 2
             / np.sin(np.pi * (energy - xs / m)) ** 2) / m ** 2
    return probs / probs.sum()


def coarse_qpe_sample(measure, k, shots, seed):
    """Sample shifted k-digit phase-estimation energies from a measure.

    Per shot: a constant c uniform in [0, 2^-k) shifts every level, a level
    is drawn by its weight, the integer outcome x by the QPE kernel at the
    shifted energy, and 2^-k x - c is recorded.  Each shot uses its own
    counter-derived stream, so results never depend on evaluation order.
    """
    m = 2 ** k
    probs = measure.probs
    probs = probs / probs.sum()
    energies = measure.energies
    out = np.empty(shots)
    for shot in range(shots):
        rng = np.random.default_rng([seed, shot])
        c = rng.uniform(0.0, 1.0 / m)
        n = rng.choice(len(probs), p=probs)
        x = rng.choice(m, p=qpe_kernel_probs(energies[n] + c, k))
        out[shot] = x / m - c
    return out


def kde(samples, bandwidth=None, grid=None):
    """Gaussian kernel density estimate (1/Mh) sum_i K((x - X_i)/h).

    Default bandwidth is M^{-1/5} times the sample standard deviation (use
    2^-k for coarse phase-estimation samples).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    if bandwidth is None:
        spread = float(np.std(samples))
        if spread == 0.0:
            raise ValueError("degenerate samples: pass a bandwidth")
        bandwidth = spread * samples.size ** (-1 / 5)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    norm = samples.size * bandwidth * np.sqrt(2 * np.pi)
    out = np.zeros(grid.shape)
    for start in range(0, samples.size, 4096):
        block = samples[start:start + 4096]
        z = (grid[:, None] - block[None, :]) / bandwidth
        out += np.exp(-0.5 * z ** 2).sum(axis=1)
    return grid, out / norm
