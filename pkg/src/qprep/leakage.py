"""Probability that a k-digit phase readout lands below the accepted window.

Even a state with no weight under the target energy produces occasional
readouts there: the discrete readout kernel of each level has algebraic
tails, and mass caught by register values x below the acceptance boundary
x_upper = ceil(2^k (E0 - eps)) is what we call leakage.  Register values are
counted in the centred window [-2^(k-1), 2^(k-1)) so that "below the ground
energy" keeps meaning the bins just under 2^k E0 rather than the top of the
register.

The module offers four views of the same quantity: the exact double sum over
levels and bins, a one-term-per-level approximation with a rigorous
antiderivative bracket, a panel-quadrature integral form for smooth
densities, and a digit-count heuristic saying how large k must be before
leakage stops mattering.  A CDF-comparison diagnosis flags states whose
low-energy readout tail is dominated by kernel spill rather than by actual
spectral weight.
"""

import math
from dataclasses import dataclass

import numpy as np

from .qpestats import qpe_outcome_distribution
from .spectra import SPIKE_TOL, as_measure

DIGIT_CAP = 64


class DigitCapExceeded(ValueError):
    """The requested precision needs more readout digits than the cap."""


@dataclass(frozen=True)
class LeakageSetup:
    """Window bookkeeping for below-threshold readouts.

    ``e0`` is the reference ground energy and ``epsilon`` the tolerated
    error; outcomes strictly below ``x_upper`` count as leaked.  Levels at
    or below ``e0 - epsilon`` belong below the boundary already and are not
    counted as leakers.
    """

    k: int
    epsilon: float
    e0: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one readout digit")
        if self.epsilon <= 0:
            raise ValueError("tolerated error must be positive")
        if not 0.0 <= self.e0 <= 1.0:
            raise ValueError("reference energy must lie in [0, 1]")

    @property
    def size(self):
        return 2 ** self.k

    @property
    def x_upper(self):
        return math.ceil(self.size * (self.e0 - self.epsilon))

    @property
    def window_low(self):
        return -(2 ** (self.k - 1))

    @property
    def exclude_below(self):
        return self.e0 - self.epsilon


def _split_bins(energy, size):
    """Integer and fractional parts of 2^k E; fraction None on the grid."""
    scaled = size * energy
    x_n = math.floor(scaled)
    delta = scaled - x_n
    if delta < SPIKE_TOL or 1.0 - delta < SPIKE_TOL:
        return x_n, None
    return x_n, delta


def leak_prob_exact(m, setup, exclude_below=None):
    """Exact leaked probability: every level against every window bin.

    A level sitting exactly on the readout grid contributes nothing (its
    kernel is a delta at its own bin, which sits at or above the boundary).
    """
    measure = as_measure(m)
    cut = setup.exclude_below if exclude_below is None else exclude_below
    xs = np.arange(setup.window_low, setup.x_upper, dtype=float)
    if xs.size == 0:
        return 0.0
    size = setup.size
    total = 0.0
    for energy, weight in measure.levels:
        if energy <= cut:
            continue
        scaled = size * energy
        _, delta = _split_bins(energy, size)
        if delta is None:
            continue
        terms = math.sin(math.pi * delta) ** 2 \
            / np.sin(np.pi * (scaled - xs) / size) ** 2
        total += weight * terms.sum() / size ** 2
    return float(total)


def leak_prob_level_approx(energy, setup):
    """One-term estimate of a single level's leaked probability.

    Keeps only the first-order pole of the kernel tail: sin^2(pi delta) /
    (pi^2 (x_n - x_upper + delta)).  Clamped at zero for levels at or below
    the boundary, where the expansion has no meaning.
    """
    x_n, delta = _split_bins(energy, setup.size)
    if delta is None:
        return 0.0
    gap = x_n - setup.x_upper + delta
    if gap <= 0:
        return 0.0
    return math.sin(math.pi * delta) ** 2 / (math.pi ** 2 * gap)


def leak_prob_level_bracket(energy, setup):
    """Rigorous (lower, upper) bounds on a single level's leaked probability.

    The kernel tail is monotone across the window, so the bin sum is pinched
    between the antiderivative (a cotangent) evaluated one bin apart:
    I(x_upper - 1) <= sum <= I(x_upper).
    """
    size = setup.size
    x_n, delta = _split_bins(energy, setup.size)
    if delta is None:
        return 0.0, 0.0
    scaled = size * energy
    if scaled <= setup.x_upper:
        raise ValueError("level sits at or below the leakage boundary")
    if scaled >= size / 2 + setup.x_upper:
        raise ValueError("level aliases across the centred readout window")
    amp = math.sin(math.pi * delta) ** 2 / (math.pi * size)

    def anti(x):
        return amp / math.tan(math.pi * (scaled - x) / size)

    base = anti(setup.window_low)
    return anti(setup.x_upper - 1) - base, anti(setup.x_upper) - base


def leak_prob_approx(m, setup, exclude_below=None):
    """Weighted one-term estimates summed over all counted levels."""
    measure = as_measure(m)
    cut = setup.exclude_below if exclude_below is None else exclude_below
    return float(sum(weight * leak_prob_level_approx(energy, setup)
                     for energy, weight in measure.levels
                     if energy > cut))


def leak_prob_integral(density_fn, setup, e_max=1.0, nodes_per_panel=10):
    """Leaked probability of a smooth density by panel quadrature.

    Integrates P(E) sin^2(pi 2^k E) / (E - x_upper/2^k) from e0 + epsilon
    upward with Gauss-Legendre panels aligned to the oscillation period, so
    the rapidly oscillating factor is resolved exactly where it matters.
    ``density_fn`` must accept numpy arrays.
    """
    size = setup.size
    lower = setup.e0 + setup.epsilon
    if e_max <= lower:
        return 0.0
    center = setup.x_upper / size
    n_panels = max(8, 2 * math.ceil((e_max - lower) * size))
    edges = np.linspace(lower, e_max, n_panels + 1)
    nodes, node_weights = np.polynomial.legendre.leggauss(nodes_per_panel)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = density_fn(pts) * np.sin(np.pi * size * pts) ** 2 / (pts - center)
    total = float(np.sum(vals * (half[:, None] * node_weights[None, :])))
    return total / (math.pi ** 2 * size)


def required_digits(p0, e_p, e0, epsilon, k_cap=DIGIT_CAP):
    """Smallest digit count that makes leakage past the ground bin unlikely.

    Demands 2^k >= max(1 / [p0 (E_p - E0)], 1 / epsilon): enough bins that
    the distribution peak at E_p cannot spill a whole ground-detection's
    worth of probability below E0, and enough to resolve epsilon at all.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError("peak weight must be a probability")
    if e_p <= e0:
        raise ValueError("distribution peak must lie above the reference")
    if epsilon <= 0:
        raise ValueError("tolerated error must be positive")
    if p0 == 0.0:
        raise DigitCapExceeded("zero peak weight needs unbounded digits")
    need = max(1.0 / (p0 * (e_p - e0)), 1.0 / epsilon)
    k = max(1, math.ceil(math.log2(need)))
    if k > k_cap:
        raise DigitCapExceeded("need %d digits, cap is %d" % (k, k_cap))
    return k


@dataclass(frozen=True)
class LeakageDiagnosis:
    """CDF comparison at the energy where one of n_reps outcomes is due.

    ``threshold_energy`` is the last readout-grid energy whose spectral
    (energy) CDF still sits at or below 1/n_reps; ``ratio`` compares the
    readout CDF against the energy CDF there.  A ratio well above 1 means
    the low-energy readouts one expects to see are kernel spill, not state
    weight — refining or more digits are needed before trusting them.
    """

    k: int
    n_reps: int
    flag_factor: float
    threshold_energy: float
    energy_cdf: float
    outcome_cdf: float
    ratio: float
    flagged: bool

    def as_dict(self):
        return {
            "k": self.k,
            "n_reps": self.n_reps,
            "flag_factor": self.flag_factor,
            "threshold_energy": self.threshold_energy,
            "energy_cdf": self.energy_cdf,
            "outcome_cdf": self.outcome_cdf,
            "ratio": self.ratio if math.isfinite(self.ratio) else None,
            "flagged": self.flagged,
        }


def diagnose_leakage(m, k, n_reps, flag_factor=2.0):
    """Compare readout and spectral CDFs at the 1/n_reps quantile."""
    if n_reps < 1:
        raise ValueError("need at least one repetition")
    if flag_factor <= 0:
        raise ValueError("flag factor must be positive")
    measure = as_measure(m)
    dist = qpe_outcome_distribution(measure, k)
    grid = dist.energies
    cum = np.concatenate([[0.0], np.cumsum(measure.probs)])
    energy_cdfs = cum[np.searchsorted(measure.energies, grid, side="right")]
    target = 1.0 / n_reps
    below = np.flatnonzero(energy_cdfs <= target + 1e-15)
    pick = below[-1] if below.size else 0
    energy_cdf = float(energy_cdfs[pick])
    outcome_cdf = dist.cdf_below(grid[pick])
    if energy_cdf > 0.0:
        ratio = outcome_cdf / energy_cdf
    else:
        ratio = math.inf if outcome_cdf > 0.0 else 1.0
    return LeakageDiagnosis(k=k, n_reps=n_reps, flag_factor=flag_factor,
                            threshold_energy=float(grid[pick]),
                            energy_cdf=energy_cdf,
                            outcome_cdf=outcome_cdf,
                            ratio=ratio,
                            flagged=ratio > flag_factor)
