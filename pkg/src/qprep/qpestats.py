"""Outcome statistics for coarse phase estimation runs.

A k-digit phase readout of an input state maps its spectral measure onto a
discrete distribution over the 2^k register values x, where each level E_n
contributes through the periodic sinc-squared kernel centred on 2^k E_n.
This module builds that outcome law, evaluates cumulative probabilities on
either side of a target energy, analyses the minimum of K independent
outcomes (the quantity a repeat-until-lucky strategy actually reports), and
condenses the "is this state worth refining" question into a small triage
report.

All routines accept either a discrete :class:`~qprep.spectra.SpectralMeasure`
or a sampled density as a ``(grid, values)`` pair; densities are first
collapsed onto ``DENSITY_LEVELS`` point masses so a single code path does the
sums.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .spectra import as_measure, qpe_kernel_probs

PROB_SUM_TOL = 1e-10
DENSITY_LEVELS = 4096
EASY_THRESHOLD = 0.5


@dataclass(frozen=True)
class OutcomeDistribution:
    """Distribution of a k-digit readout over register values 0 .. 2^k - 1."""

    k: int
    probs: np.ndarray

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one readout digit")
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (2 ** self.k,):
            raise ValueError("expected %d outcome probabilities, got %r"
                             % (2 ** self.k, probs.shape))
        if np.any(probs < -PROB_SUM_TOL):
            raise ValueError("negative outcome probability")
        if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError("outcome probabilities sum to %.3e, not 1"
                             % probs.sum())
        object.__setattr__(self, "probs", probs)

    @property
    def energies(self):
        """Energy value x / 2^k read off for each register outcome x."""
        return np.arange(2 ** self.k) / 2 ** self.k

    def cdf_below(self, energy):
        """Probability that the readout energy is <= ``energy``."""
        return float(self.probs[self.energies <= energy].sum())


def qpe_outcome_distribution(m, k):
    """Exact k-digit outcome law of a measure or sampled density.

    Each level is spread over the register by the periodic readout kernel;
    a level sitting exactly on the grid contributes a single delta.
    """
    measure = as_measure(m, DENSITY_LEVELS)
    probs = np.zeros(2 ** k)
    for energy, weight in measure.levels:
        probs += weight * qpe_kernel_probs(energy, k)
    return OutcomeDistribution(k, probs)


def cdf_below(m, energy):
    """Total weight of the measure (or density) at energies <= ``energy``."""
    measure = as_measure(m, DENSITY_LEVELS)
    return float(measure.probs[measure.energies <= energy].sum())


def min_of_k_cdf(p_less_fn, n_reps, energy):
    """CDF of the minimum of ``n_reps`` independent outcomes.

    ``p_less_fn`` maps an energy to the single-outcome probability of
    falling at or below it; at least one of K draws lands there with
    probability 1 - (1 - p)^K.
    """
    if n_reps < 1:
        raise ValueError("need at least one repetition")
    p = p_less_fn(energy)
    if not 0.0 <= p <= 1.0 + PROB_SUM_TOL:
        raise ValueError("p_less_fn returned %r, not a probability" % (p,))
    return 1.0 - (1.0 - min(p, 1.0)) ** n_reps


def min_of_k_pdf(grid, values, n_reps):
    """Density of the minimum of ``n_reps`` draws from a sampled density.

    Differentiating 1 - (1 - F(E))^K gives K P(E) (1 - F(E))^(K-1); the
    result integrates to 1 whenever the input does.
    """
    if n_reps < 1:
        raise ValueError("need at least one repetition")
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    cdf = cumulative_trapezoid(values, grid, initial=0.0)
    survival = np.maximum(1.0 - cdf, 0.0)
    return n_reps * values * survival ** (n_reps - 1)


def expected_min(m, n_reps):
    """Mean of the minimum of ``n_reps`` independent draws from a measure."""
    if n_reps < 1:
        raise ValueError("need at least one repetition")
    measure = as_measure(m, DENSITY_LEVELS)
    tail = np.cumsum(measure.probs[::-1])[::-1]
    tail = np.minimum(tail, 1.0)
    hit = tail ** n_reps - np.append(tail[1:], 0.0) ** n_reps
    return float(measure.energies @ hit)


@dataclass(frozen=True)
class GoldilocksReport:
    """Triage verdict on whether coarse phase estimation can beat a target.

    ``label`` is "Easy" when a single outcome already lands below the target
    more often than ``easy_threshold``, "Goldilocks" when the expected number
    of repetitions fits the stated budget, and "Hard" otherwise (including
    the zero-weight case, where no number of repetitions helps).
    """

    target_energy: float
    budget: int
    easy_threshold: float
    p_below_target: float
    required_reps: int | None
    label: str

    def as_dict(self):
        return {
            "target_energy": self.target_energy,
            "budget": self.budget,
            "easy_threshold": self.easy_threshold,
            "p_below_target": self.p_below_target,
            "required_reps": self.required_reps,
            "class": self.label,
        }


def goldilocks_report(m, target_energy, budget, easy_threshold=EASY_THRESHOLD):
    """Classify a state by the weight it places below a known target energy.

    ``budget`` is the number of coarse-QPE repetitions one is willing to
    spend; the expected repetitions to see one outcome below the target is
    ceil(1/p).
    """
    if budget < 1:
        raise ValueError("repetition budget must be positive")
    if not 0.0 < easy_threshold <= 1.0:
        raise ValueError("easy_threshold must lie in (0, 1]")
    p = cdf_below(m, target_energy)
    required = math.ceil(1.0 / p) if p > 0.0 else None
    if p > easy_threshold:
        label = "Easy"
    elif required is not None and required <= budget:
        label = "Goldilocks"
    else:
        label = "Hard"
    return GoldilocksReport(target_energy=float(target_energy),
                            budget=int(budget),
                            easy_threshold=float(easy_threshold),
                            p_below_target=p,
                            required_reps=required,
                            label=label)
