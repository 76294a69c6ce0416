"""Seeded generators for the synthetic benchmarks.

* ``three_class``: three nonlinear mean curves on 50 equispaced points in
  [0, 1], proportions (0.4, 0.3, 0.3), Gaussian noise with sd 0.1.
* ``waveform``: the classic waveform benchmark on t = 1..21, three equiprobable classes
  built as random convex combinations of two triangular pulses plus unit
  Gaussian noise.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset

SCENARIOS = ("three_class", "waveform")

THREE_CLASS_PI = np.array([0.4, 0.3, 0.3])
THREE_CLASS_SIGMA = 0.1
THREE_CLASS_M = 50
WAVEFORM_PI = np.full(3, 1.0 / 3.0)
WAVEFORM_SIGMA = 1.0
WAVEFORM_T = np.arange(1.0, 22.0)


def three_class_means(x) -> np.ndarray:
    """The three class mean functions evaluated on ``x``, shape ``(3, len(x))``."""
    x = np.asarray(x, dtype=float)
    return np.vstack([
        0.8 + 0.5 * np.exp(-1.5 * x) * np.sin(1.3 * np.pi * x),
        0.5 + 0.8 * np.exp(-x) * np.sin(0.9 * np.pi * x),
        1.0 + 0.5 * np.exp(-x) * np.sin(1.2 * np.pi * x),
    ])


def h1(t):
    return np.maximum(6.0 - np.abs(np.asarray(t, dtype=float) - 11.0), 0.0)


def h2(t):
    return h1(np.asarray(t, dtype=float) - 4.0)


def h3(t):
    return h1(np.asarray(t, dtype=float) + 4.0)


# (first pulse, second pulse) for each waveform class
_WAVE_PAIRS = ((h1, h2), (h2, h3), (h1, h3))


def waveform_means(t=WAVEFORM_T) -> np.ndarray:
    """Class means of the waveform generator (``u`` averaged out at 1/2)."""
    return np.vstack([0.5 * a(t) + 0.5 * b(t) for a, b in _WAVE_PAIRS])


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _draw_labels(rng: np.random.Generator, n: int, pi: np.ndarray, fixed_counts: bool) -> np.ndarray:
    if not fixed_counts:
        return rng.choice(pi.size, size=n, p=pi)
    # largest-remainder rounding of n * pi, then a random order
    raw = n * pi
    counts = np.floor(raw).astype(int)
    short = n - counts.sum()
    counts[np.argsort(-(raw - counts), kind="stable")[:short]] += 1
    return rng.permutation(np.repeat(np.arange(pi.size), counts))


def gen_three_class(n: int, seed: int, noise_sd: float = THREE_CLASS_SIGMA, fixed_counts: bool = False) -> Dataset:
    """Three-class nonlinear curves.

    Labels are i.i.d. draws from (0.4, 0.3, 0.3); ``fixed_counts`` instead
    realizes the proportions exactly (up to rounding) in shuffled order.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    rng = _rng(seed)
    x = np.linspace(0.0, 1.0, THREE_CLASS_M)
    labels = _draw_labels(rng, n, THREE_CLASS_PI, fixed_counts)
    means = three_class_means(x)
    Y = means[labels] + noise_sd * rng.standard_normal((n, x.size))
    return Dataset.from_arrays(x, Y, labels + 1)


def gen_waveform(n: int, seed: int, noise_sd: float = WAVEFORM_SIGMA, u: float | None = None,
                 fixed_counts: bool = False) -> Dataset:
    """Waveform curves. ``u`` fixes the mixing weight (normally uniform per curve)."""
    if n < 3:
        raise ValueError("n must be >= 3")
    rng = _rng(seed)
    t = WAVEFORM_T
    labels = _draw_labels(rng, n, WAVEFORM_PI, fixed_counts)
    uu = rng.uniform(0.0, 1.0, size=n) if u is None else np.full(n, float(u))
    eps = rng.standard_normal((n, t.size))
    pulses = np.array([[a(t), b(t)] for a, b in _WAVE_PAIRS])  # (3, 2, m)
    first, second = pulses[labels, 0], pulses[labels, 1]
    Y = uu[:, None] * first + (1.0 - uu[:, None]) * second + noise_sd * eps
    return Dataset.from_arrays(t, Y, labels + 1)


def generate(scenario: str, n: int, seed: int, fixed_counts: bool = False) -> Dataset:
    if scenario == "three_class":
        return gen_three_class(n, seed, fixed_counts=fixed_counts)
    if scenario == "waveform":
        return gen_waveform(n, seed, fixed_counts=fixed_counts)
    raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")


def truth(scenario: str, x=None) -> dict:
    """Generating parameters of a scenario: grid, class means on it, proportions, noise sd."""
    if scenario == "three_class":
        x = np.linspace(0.0, 1.0, THREE_CLASS_M) if x is None else np.asarray(x, dtype=float)
        return {"x": x, "means": three_class_means(x), "pi": THREE_CLASS_PI.copy(), "sigma": THREE_CLASS_SIGMA}
    if scenario == "waveform":
        x = WAVEFORM_T.copy() if x is None else np.asarray(x, dtype=float)
        return {"x": x, "means": waveform_means(x), "pi": WAVEFORM_PI.copy(), "sigma": WAVEFORM_SIGMA}
    raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
