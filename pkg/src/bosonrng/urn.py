"""Two-mode reinforcement (Pólya urn) process.

Each transition adds one ball: blue with probability (b+1)/(b+r+2), red
otherwise. A uniform draw u selects blue iff u < P(blue). Runs are
deterministic given (seed, run_index); see ``streams`` for the derivation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, streams

# Run lengths must keep counts well inside int64 for the transition arithmetic.
MAX_TOTAL_COUNT = 1 << 62


class RunBatchError(RuntimeError):
    """A run inside a batch failed; message carries the run identification."""


@dataclass(frozen=True)
class UrnState:
    """Mode populations plus the number of transitions applied so far."""

    blue: int
    red: int
    step: int = 0

    def __post_init__(self):
        if self.blue < 0 or self.red < 0 or self.step < 0:
            raise ValueError(f"urn counts and step must be non-negative, got {self}")

    @property
    def total(self) -> int:
        return self.blue + self.red

    @property
    def fraction(self) -> float:
        if self.total == 0:
            raise ValueError("fraction undefined for an empty urn")
        return self.blue / self.total


@dataclass(frozen=True)
class RunConfig:
    initial_blue: int
    initial_red: int
    steps: int
    record_stride: int = 1
    seed: int = 0
    run_index: int = 0

    def __post_init__(self):
        if self.initial_blue < 0 or self.initial_red < 0:
            raise ValueError("initial populations must be non-negative")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.steps > MAX_TOTAL_COUNT - (self.initial_blue + self.initial_red):
            raise ValueError(f"run length {self.steps} would overflow the count range")
        streams.derive_key(self.seed, streams.CHANNEL_URN, self.run_index)

    @property
    def n_recorded(self) -> int:
        return self.steps // self.record_stride + (1 if self.steps % self.record_stride else 0)


@dataclass(frozen=True)
class Trajectory:
    """Recorded fractions of one run; the limiting value is the final fraction."""

    initial: UrnState
    final: UrnState
    fractions: np.ndarray = field(repr=False)

    @property
    def limiting_value(self) -> float:
        return float(self.fractions[-1])


def step_probability_blue(state: UrnState) -> float:
    """Probability that the next ball lands in the blue mode."""
    return (state.blue + 1.0) / (state.blue + state.red + 2.0)


def advance(state: UrnState, rng) -> UrnState:
    """Apply one transition; ``rng.random()`` must yield a uniform in [0, 1)."""
    if rng.random() < step_probability_blue(state):
        return UrnState(state.blue + 1, state.red, state.step + 1)
    return UrnState(state.blue, state.red + 1, state.step + 1)


def run(config: RunConfig) -> Trajectory:
    """Execute one run on its derived stream; bit-reproducible per config."""
    key0, key1 = streams.derive_key(config.seed, streams.CHANNEL_URN, config.run_index)
    fractions = np.empty(config.n_recorded, dtype=np.float64)
    b_final = _kernels.urn_trajectory(
        np.uint64(key0), np.uint64(key1),
        np.int64(config.initial_blue), np.int64(config.initial_red),
        np.int64(config.steps), np.int64(config.record_stride), fractions,
    )
    initial = UrnState(config.initial_blue, config.initial_red, 0)
    total = config.initial_blue + config.initial_red + config.steps
    final = UrnState(int(b_final), total - int(b_final), config.steps)
    return Trajectory(initial=initial, final=final, fractions=fractions)


def _run_reference(config: RunConfig) -> Trajectory:
    """Pure-Python twin of ``run`` used as an oracle for the jitted path."""
    stream = streams.urn_stream(config.seed, config.run_index)
    state = UrnState(config.initial_blue, config.initial_red, 0)
    initial = state
    fractions = []
    for i in range(1, config.steps + 1):
        state = advance(state, stream)
        if i % config.record_stride == 0 or i == config.steps:
            fractions.append(state.fraction)
    return Trajectory(initial=initial, final=state, fractions=np.asarray(fractions))


def run_batch(configs, workers: int = 1) -> list[Trajectory]:
    """Run a batch; outputs equal sequential ``run`` calls for any parallelism."""
    configs = list(configs)
    if not configs:
        raise ValueError("run_batch requires at least one config")

    def _one(item):
        position, cfg = item
        try:
            return run(cfg)
        except Exception as exc:
            raise RunBatchError(
                f"run {position} (seed={cfg.seed}, run_index={cfg.run_index}) failed: {exc}"
            ) from exc

    if workers <= 1:
        return [_one(item) for item in enumerate(configs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, enumerate(configs)))


def run_ensemble(config: RunConfig, count: int, workers: int = 1) -> np.ndarray:
    """Limiting values of ``count`` runs indexed config.run_index + i.

    Equivalent to collecting ``run(...).limiting_value`` over the batch, but
    without trajectory recording; used for large ensembles.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if config.run_index + count - 1 > streams.MAX_RUN_INDEX:
        raise ValueError("run indices would exceed the stream derivation range")
    out = np.empty(count, dtype=np.float64)
    if count == 0:
        return out
    b0s = np.full(count, config.initial_blue, dtype=np.int64)
    r0s = np.full(count, config.initial_red, dtype=np.int64)
    previous = _kernels.set_workers(workers)
    try:
        _kernels.ensemble_limits(
            np.uint64(config.seed), np.uint64(config.run_index),
            b0s, r0s, np.int64(config.steps), out,
        )
    finally:
        _kernels.restore_workers(previous)
    return out


def trajectory_csv_rows(config: RunConfig, trajectory: Trajectory):
    """Yield (step, fraction) pairs for CSV export; step 0 included when defined."""
    if trajectory.initial.total > 0:
        yield 0, trajectory.initial.fraction
    step = 0
    for j, frac in enumerate(trajectory.fractions):
        step = min((j + 1) * config.record_stride, config.steps)
        yield step, float(frac)
