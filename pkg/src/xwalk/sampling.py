"""Weighted edge sampling over per-node cdf slices.

Two interchangeable strategies draw arc indices proportional to edge weight:

* inverse-transform sampling (ITS): binary search of a uniform variate in the
  node's cdf, O(log degree) probes per draw;
* a Metropolis chain seeded by one ITS draw: each step perturbs the current
  arc index on the normalized [0, 1) scale with a Gaussian proposal folded
  back into range, then accepts with the usual probability ratio. Only the
  first draw pays for a binary search.

Both leave the per-draw marginal distribution equal to the edge-weight
distribution; the chain trades independence of draws for constant-time steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import CsrGraph

# Steps are pre-drawn in blocks to keep RNG overhead off the chain's hot loop.
_CHUNK = 1 << 15

_ONE_BELOW = math.nextafter(1.0, 0.0)


class DeadEndError(Exception):
    """Sampling was requested from a node with no arcs."""


@dataclass(frozen=True)
class SamplerConfig:
    """Edge-sampling knobs. ``method`` selects the Metropolis chain or pure ITS."""

    proposal_variance: float = 0.2
    rng_seed: int = 0
    method: str = "mh"

    def __post_init__(self) -> None:
        if self.proposal_variance <= 0.0:
            raise ValueError("proposal_variance must be positive")
        if self.method not in ("mh", "its"):
            raise ValueError(f"unknown sampling method {self.method!r}")

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


@dataclass
class ProbeStats:
    """Work counters: cdf binary-search probes and Metropolis steps/accepts."""

    binary_search_probes: int = 0
    mh_steps: int = 0
    mh_accepts: int = 0


@dataclass
class EdgeCounter:
    """Visit counts per local arc index of one node."""

    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0

    def add(self, index: int, count: int = 1) -> None:
        self.counts[index] = self.counts.get(index, 0) + count
        self.total += count


def _probe_cost(length: int) -> int:
    """Binary-search probes charged per ITS draw: ceil(log2(length))."""
    return (length - 1).bit_length()


def its_sample(cdf: np.ndarray, p: float, stats: ProbeStats | None = None) -> int:
    """Smallest index i with p <= cdf[i] via binary search."""
    length = int(cdf.shape[0])
    if length == 0:
        raise ValueError("cannot sample from an empty cdf")
    index = int(np.searchsorted(cdf, p, side="left"))
    if index >= length:
        index = length - 1
    if stats is not None:
        stats.binary_search_probes += _probe_cost(length)
    return index


def fold_unit(x: float) -> float:
    """Reflect a real at 0 and 1 until it lands in [0, 1)."""
    y = math.fmod(abs(x), 2.0)
    if y >= 1.0:
        y = 2.0 - y
    return y if y < 1.0 else _ONE_BELOW


def _transition(
    cdf: np.ndarray, length: int, current: int, z: float, unif: float
) -> tuple[int, bool]:
    """One Metropolis move from ``current`` given a Gaussian perturbation ``z``."""
    position = fold_unit((current + 0.5) / length + z)
    candidate = int(position * length)
    if candidate >= length:
        candidate = length - 1
    if candidate == current:
        return current, True
    p_candidate = cdf[candidate] - (cdf[candidate - 1] if candidate else 0.0)
    p_current = cdf[current] - (cdf[current - 1] if current else 0.0)
    # Accept with probability min(1, p_candidate / p_current).
    if p_candidate >= p_current or unif * p_current < p_candidate:
        return candidate, True
    return current, False


def mh_step(
    cdf: np.ndarray,
    current: int,
    config: SamplerConfig,
    rng: np.random.Generator,
    stats: ProbeStats | None = None,
) -> int:
    """Advance the chain one step; rejection returns ``current`` unchanged."""
    length = int(cdf.shape[0])
    if length == 0:
        raise ValueError("cannot sample from an empty cdf")
    if not 0 <= current < length:
        raise IndexError(f"current index {current} out of range")
    if length == 1:
        return 0
    z = rng.normal(0.0, math.sqrt(config.proposal_variance))
    unif = rng.random()
    index, accepted = _transition(cdf, length, current, z, unif)
    if stats is not None:
        stats.mh_steps += 1
        stats.mh_accepts += int(accepted)
    return index


def sample_edges(
    graph: CsrGraph,
    node: int,
    c: int,
    config: SamplerConfig,
    rng: np.random.Generator,
    m: int = 1,
    stats: ProbeStats | None = None,
) -> EdgeCounter:
    """Draw ``c`` weighted arcs of ``node``; the first draw is credited ``m``.

    Counter total is always m + (c - 1). Degree-1 nodes short-circuit without
    consuming randomness; degree-2 nodes use ITS draws directly (a Metropolis
    chain adds nothing over two states). The ``its`` method uses independent
    binary-search draws throughout.
    """
    if c < 1:
        raise ValueError("c must be at least 1")
    if m < 1:
        raise ValueError("m must be at least 1")
    degree = graph.degree(node)
    if degree == 0:
        raise DeadEndError(f"node {node} has no arcs")

    counter = EdgeCounter()
    if degree == 1:
        counter.add(0, m + c - 1)
        return counter

    cdf = graph.cdf_slice(node)
    if config.method == "its" or degree == 2 or c == 1:
        draws = rng.random(c)
        indices = np.searchsorted(cdf, draws, side="left")
        np.clip(indices, 0, degree - 1, out=indices)
        if stats is not None:
            stats.binary_search_probes += c * _probe_cost(degree)
        first = int(indices[0])
        values, counts = np.unique(indices, return_counts=True)
        for value, count in zip(values.tolist(), counts.tolist()):
            counter.add(int(value), int(count))
        if m > 1:
            counter.add(first, m - 1)
        return counter

    current = its_sample(cdf, rng.random(), stats)
    counter.add(current, m)
    remaining = c - 1
    accepted_total = 0
    while remaining > 0:
        block = min(remaining, _CHUNK)
        zs = rng.normal(0.0, math.sqrt(config.proposal_variance), block).tolist()
        unifs = rng.random(block).tolist()
        for z, unif in zip(zs, unifs):
            current, accepted = _transition(cdf, degree, current, z, unif)
            accepted_total += int(accepted)
            counter.add(current)
        remaining -= block
    if stats is not None:
        stats.mh_steps += c - 1
        stats.mh_accepts += accepted_total
    return counter
