"""Exact small-scale verifiers for the mode-population process.

Two independent routes to the distribution of blue additions after k steps:

* ``evolve_amplitudes`` -- step-by-step amplitude branching of the joint
  mode/emitter state. Emitter records are mutually orthogonal, so squared
  amplitudes add without interference; records sharing a blue count carry
  identical amplitudes and are stored as one term with a multiplicity.
* ``enumerate_paths`` -- exact rational bookkeeping of the classical
  transition law over all paths, grouped by blue count.

Agreement of the two is the core correctness check of the whole simulator
(surfaced through the CLI ``verify`` command and the acceptance suite).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb, sqrt

ENUMERATION_STEP_CAP = 20
AMPLITUDE_STEP_CAP = 16


@dataclass(frozen=True)
class AmplitudeTerm:
    """All branches with `blue_additions` blue emissions after `step` steps.

    Every such branch has the same amplitude (the branching factors commute),
    so one term carries the shared amplitude and the branch multiplicity.
    """

    blue_additions: int
    multiplicity: int
    amplitude: float


@dataclass(frozen=True)
class AmplitudeState:
    initial_blue: int
    initial_red: int
    step: int
    terms: tuple[AmplitudeTerm, ...]

    def squared_norm(self) -> float:
        return sum(t.multiplicity * t.amplitude * t.amplitude for t in self.terms)

    def photon_counts(self, term: AmplitudeTerm) -> tuple[int, int]:
        """(n, m) mode occupation for a term."""
        return (
            self.initial_blue + term.blue_additions,
            self.initial_red + (self.step - term.blue_additions),
        )

    def iter_expanded(self):
        """Yield (n, m, emitter_record, amplitude) with explicit records.

        Records are tuples over {'b', 'r'} of length ``step``. Intended for
        small states only (the record count grows combinatorially).
        """
        if self.step > 12:
            raise ValueError("expanded view is limited to 12 steps")
        for term in self.terms:
            n, m = self.photon_counts(term)
            for blue_positions in combinations(range(self.step), term.blue_additions):
                record = tuple(
                    "b" if i in blue_positions else "r" for i in range(self.step)
                )
                yield n, m, record, term.amplitude


@dataclass(frozen=True)
class PathDistribution:
    """Probability of each blue-addition count; values are exact Fractions
    when produced by ``enumerate_paths`` and floats from amplitude marginals."""

    by_blue_count: dict

    def normalization_defect(self):
        return abs(1 - sum(self.by_blue_count.values()))

    def as_floats(self) -> dict[int, float]:
        return {k: float(v) for k, v in self.by_blue_count.items()}


def evolve_amplitudes(initial: tuple[int, int], steps: int) -> AmplitudeState:
    """Apply the amplitude branching `steps` times from mode counts (n0, m0).

    Each branch splits with factors sqrt((n+1)/(n+m+2)) into the blue mode and
    sqrt((m+1)/(n+m+2)) into the red mode, tagging the emitter record. Merged
    blue/red parents must agree on the child amplitude; a mismatch signals
    broken bookkeeping and raises.
    """
    n0, m0 = initial
    if n0 < 0 or m0 < 0:
        raise ValueError("initial mode counts must be non-negative")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if steps > AMPLITUDE_STEP_CAP:
        raise ValueError(f"amplitude evolution capped at {AMPLITUDE_STEP_CAP} steps, got {steps}")

    amps = {0: 1.0}  # blue_additions -> branch amplitude
    mults = {0: 1}
    for s in range(steps):
        total = n0 + m0 + s
        denom = total + 2.0
        new_amps: dict[int, float] = {}
        new_mults: dict[int, int] = {}
        for j, amp in amps.items():
            n = n0 + j
            m = m0 + (s - j)
            blue_child = amp * sqrt((n + 1.0) / denom)
            red_child = amp * sqrt((m + 1.0) / denom)
            for child_j, child_amp in ((j + 1, blue_child), (j, red_child)):
                if child_j in new_amps:
                    if abs(new_amps[child_j] - child_amp) > 1e-12 * abs(child_amp):
                        raise AssertionError(
                            f"amplitude bookkeeping mismatch at step {s + 1}, count {child_j}"
                        )
                else:
                    new_amps[child_j] = child_amp
            # blue branches move j -> j+1, red branches keep j
            new_mults[j + 1] = new_mults.get(j + 1, 0) + mults[j]
            new_mults[j] = new_mults.get(j, 0) + mults[j]
        amps = new_amps
        mults = new_mults

    terms = tuple(
        AmplitudeTerm(blue_additions=j, multiplicity=mults[j], amplitude=amps[j])
        for j in sorted(amps)
    )
    return AmplitudeState(initial_blue=n0, initial_red=m0, step=steps, terms=terms)


def marginal_counts(state: AmplitudeState) -> PathDistribution:
    """Outcome probabilities: squared amplitudes summed over orthogonal records."""
    probs = {
        t.blue_additions: t.multiplicity * t.amplitude * t.amplitude
        for t in state.terms
    }
    return PathDistribution(by_blue_count=probs)


def path_probability(initial: tuple[int, int], path) -> Fraction:
    """Exact probability of one explicit path (True = blue addition)."""
    b, r = initial
    prob = Fraction(1)
    for took_blue in path:
        if took_blue:
            prob *= Fraction(b + 1, b + r + 2)
            b += 1
        else:
            prob *= Fraction(r + 1, b + r + 2)
            r += 1
    return prob


def enumerate_paths(initial: tuple[int, int], steps: int) -> PathDistribution:
    """Exact distribution of blue additions after `steps` transitions.

    Accumulates the transition law in rational arithmetic, grouping paths by
    blue count (paths sharing a count have equal probability, which
    ``path_probability`` lets tests confirm directly).
    """
    b0, r0 = initial
    if b0 < 0 or r0 < 0:
        raise ValueError("initial populations must be non-negative")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if steps > ENUMERATION_STEP_CAP:
        raise ValueError(f"path enumeration capped at {ENUMERATION_STEP_CAP} steps, got {steps}")

    probs = {0: Fraction(1)}
    for s in range(steps):
        denom = b0 + r0 + s + 2
        new: dict[int, Fraction] = {}
        for j, p in probs.items():
            p_blue = Fraction(b0 + j + 1, denom)
            new[j + 1] = new.get(j + 1, Fraction(0)) + p * p_blue
            new[j] = new.get(j, Fraction(0)) + p * (1 - p_blue)
        probs = new
    return PathDistribution(by_blue_count=dict(sorted(probs.items())))


def beta_binomial_pmf(steps: int, b0: int, r0: int) -> dict[int, Fraction]:
    """Closed-form target law: exact pmf of blue additions in `steps` draws."""
    out = {}
    for j in range(steps + 1):
        num = comb(steps, j)
        frac = Fraction(num)
        for i in range(j):
            frac *= Fraction(b0 + 1 + i)
        for i in range(steps - j):
            frac *= Fraction(r0 + 1 + i)
        for i in range(steps):
            frac /= Fraction(b0 + r0 + 2 + i)
        out[j] = frac
    return out
