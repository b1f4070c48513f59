"""Autoregressive Gaussian MRF homogeneity scoring.

The energy of a patch is the summed squared deviation of each pixel from
the weighted mean of its in-region neighbors; a patch is acceptable when
the per-pixel energy falls below the model threshold. The Boltzmann
distribution this energy induces is enumerable for tiny state spaces,
which gives an exact oracle for the threshold equivalence and a target
for the Metropolis calibration of the threshold.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import Offset, Pixel, Window, NINE_NEIGHBORHOOD, dilate

#: Enumeration guard for the Gibbs table.
MAX_STATES = 2**20

METRICS = ("euclidean", "per_band_abs")


@dataclass(frozen=True)
class MrfModel:
    """Neighborhood, weights, metric, temperature and energy threshold.

    The neighborhood window contains the origin (as every Window does);
    the origin is skipped in the autoregressive sum. ``weights`` maps
    offsets to nonnegative reals and defaults to uniform; per pixel the
    weights are renormalized over the neighbors actually inside the
    region, so their absolute scale never matters. ``rho`` thresholds the
    per-pixel normalized energy.
    """

    neighborhood: Window = NINE_NEIGHBORHOOD
    weights: Mapping[Offset, float] | None = None
    metric: str = "euclidean"
    temperature: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")
        if self.weights is not None:
            extra = set(self.weights) - set(self.neighborhood.offsets)
            if extra:
                raise ValueError(f"weight offsets {sorted(extra)} not in neighborhood")
            if any(w < 0 for w in self.weights.values()):
                raise ValueError("weights must be nonnegative")

    def neighbor_offsets(self) -> list[tuple[Offset, float]]:
        """Non-origin (offset, raw weight) pairs used by the AR sum."""
        out = []
        for o in self.neighborhood.offsets:
            if o == (0, 0):
                continue
            w = 1.0 if self.weights is None else float(self.weights.get(o, 0.0))
            out.append((o, w))
        return out


def _as_bands(values: np.ndarray) -> np.ndarray:
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    if vals.ndim != 3:
        raise ValueError(f"patch must be (h, w) or (h, w, b), got shape {vals.shape}")
    return vals


def _shifted(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """arr sampled at (row+dy, col+dx), zero-filled outside the array."""
    out = np.zeros_like(arr)
    h, w = arr.shape[:2]
    r0, r1 = max(0, -dy), min(h, h - dy)
    c0, c1 = max(0, -dx), min(w, w - dx)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = arr[r0 + dy : r1 + dy, c0 + dx : c1 + dx]
    return out


def energy(values: np.ndarray, model: MrfModel, mask: np.ndarray | None = None) -> float:
    """Autoregressive energy of a patch over region ``mask``.

    Each in-region pixel with at least one in-region neighbor contributes
    the squared metric deviation between its value and the weighted mean
    of its in-region neighbors; isolated pixels contribute zero. Weights
    are renormalized per pixel over the available neighbors.
    """
    vals = _as_bands(values)
    h, w, b = vals.shape
    region = np.ones((h, w), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if region.shape != (h, w):
        raise ValueError(f"mask shape {region.shape} != patch shape {(h, w)}")
    if not region.any():
        raise ValueError("region is empty")

    wsum = np.zeros((h, w, b))
    wtot = np.zeros((h, w))
    for (dx, dy), weight in model.neighbor_offsets():
        if weight == 0.0:
            continue
        nb_in = _shifted(region, dy, dx)
        nb_val = _shifted(vals, dy, dx)
        wsum += weight * nb_val * nb_in[:, :, None]
        wtot += weight * nb_in

    has = region & (wtot > 0)
    if not has.any():
        return 0.0
    pred = wsum[has] / wtot[has][:, None]
    diff = pred - vals[has]
    if model.metric == "euclidean":
        dev_sq = np.sum(diff * diff, axis=1)
    else:
        dev_sq = np.sum(np.abs(diff), axis=1) ** 2
    return float(np.sum(dev_sq))


def evaluate(values: np.ndarray, model: MrfModel, mask: np.ndarray | None = None) -> int:
    """1 iff the patch is acceptable: per-pixel energy at most ``rho``."""
    vals = _as_bands(values)
    region = np.ones(vals.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    size = int(region.sum())
    if size == 0:
        raise ValueError("region is empty")
    return 1 if energy(vals, model, region) / size <= model.rho else 0


# --- exact enumeration over tiny state spaces ------------------------------


def _region_pixels(region: Iterable[Pixel]) -> tuple[tuple[Pixel, ...], np.ndarray, tuple[int, int]]:
    """Sorted pixel tuple, bbox-local mask, and bbox origin for a region."""
    pixels = tuple(sorted(set(region), key=lambda p: (p[1], p[0])))
    if not pixels:
        raise ValueError("region is empty")
    cs = [p[0] for p in pixels]
    rs = [p[1] for p in pixels]
    c0, r0 = min(cs), min(rs)
    mask = np.zeros((max(rs) - r0 + 1, max(cs) - c0 + 1), dtype=bool)
    for c, r in pixels:
        mask[r - r0, c - c0] = True
    return pixels, mask, (c0, r0)


def _neighbor_table(pixels: Sequence[Pixel], model: MrfModel) -> list[tuple[list[tuple[int, float]], float]]:
    """Per pixel: ((index, raw weight) of each in-region neighbor, weight
    total). Normalization is deferred to a single division per prediction
    so a constant patch scores exactly zero."""
    index = {p: i for i, p in enumerate(pixels)}
    table: list[tuple[list[tuple[int, float]], float]] = []
    for c, r in pixels:
        row = []
        for (dx, dy), weight in model.neighbor_offsets():
            j = index.get((c + dx, r + dy))
            if j is not None and weight > 0:
                row.append((j, weight))
        table.append((row, sum(wt for _, wt in row)))
    return table


def _state_energy(state: Sequence, table, metric: str) -> float:
    """Energy of one assignment; values are scalars or same-length tuples."""
    return sum(_site_term(state, i, table, metric) for i in range(len(table)))


def _boltzmann(energies: np.ndarray, temperature: float):
    """Normalized Boltzmann weights, computed relative to the minimum
    energy for stability. Returns (probabilities, scaled_z, shift)."""
    shift = float(energies.min())
    scaled = np.exp(-(energies - shift) / temperature)
    z = float(scaled.sum())
    return scaled / z, z, shift


@dataclass
class GibbsTable:
    """Exhaustive Boltzmann distribution over all images on a tiny region."""

    pixels: tuple[Pixel, ...]
    states: list[tuple]
    energies: np.ndarray
    probabilities: np.ndarray

    def mean_energy_per_pixel(self) -> float:
        return float(np.dot(self.probabilities, self.energies)) / len(self.pixels)


def gibbs_distribution(region: Iterable[Pixel], values: Sequence, model: MrfModel) -> GibbsTable:
    """Enumerate the Boltzmann distribution over all |V|^|R| images.

    Guarded at MAX_STATES states; probabilities are positive and sum to 1.
    """
    pixels, _, _ = _region_pixels(region)
    k = len(pixels)
    values = list(values)
    if len(values) == 0:
        raise ValueError("value set is empty")
    n_states = len(values) ** k
    if n_states > MAX_STATES:
        raise ValueError(f"state space {len(values)}^{k} exceeds {MAX_STATES}")
    table = _neighbor_table(pixels, model)
    states = list(itertools.product(values, repeat=k))
    energies = np.array([_state_energy(s, table, model.metric) for s in states])
    probs, _, _ = _boltzmann(energies, model.temperature)
    return GibbsTable(pixels, states, energies, probs)


def tau_rho_consistency(region: Iterable[Pixel], values: Sequence, model: MrfModel) -> bool:
    """Check on the enumerated state space that probability thresholding
    and energy thresholding select the same acceptance set.

    The probability threshold is the Boltzmann weight of the model's total
    energy budget rho * |R|; agreement must be exact, state by state. The
    threshold weight is evaluated in the same exp call as the state
    weights so equal exponents give bitwise equal weights, and the shared
    normalizer is left out of the comparison entirely.
    """
    gt = gibbs_distribution(region, values, model)
    rho_total = model.rho * len(gt.pixels)
    shift = float(gt.energies.min())
    scaled = np.exp(-(np.append(gt.energies, rho_total) - shift) / model.temperature)
    by_prob = scaled[:-1] >= scaled[-1]
    by_energy = gt.energies <= rho_total
    return bool(np.array_equal(by_prob, by_energy))


def calibrate_rho(patch_shape: tuple[int, int], values: Sequence, model: MrfModel,
                  samples: int, seed: int = 0) -> float:
    """Estimate a per-pixel energy threshold by Metropolis sampling.

    Runs a single-site Metropolis chain over images on a full
    (rows, cols) patch: proposals are uniform over the value set, accepted
    with probability min(1, exp(-dU/T)). Returns the chain mean of the
    per-pixel energy. Deterministic for a fixed seed (NumPy PCG64).
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rows, cols = patch_shape
    if rows < 1 or cols < 1:
        raise ValueError(f"patch shape must be positive, got {patch_shape}")
    values = list(values)
    if len(values) == 0:
        raise ValueError("value set is empty")
    pixels = tuple((c + 1, r + 1) for r in range(rows) for c in range(cols))
    k = len(pixels)
    table = _neighbor_table(pixels, model)
    # terms affected by a change at site j: j itself plus sites with j as neighbor
    affected: list[list[int]] = [[j] for j in range(k)]
    for i, (nbrs, _) in enumerate(table):
        for j, _ in nbrs:
            if i not in affected[j]:
                affected[j].append(i)

    rng = np.random.default_rng(seed)
    state = [values[int(i)] for i in rng.integers(0, len(values), size=k)]
    terms = [_site_term(state, i, table, model.metric) for i in range(k)]
    total = 0.0
    t_inv = 1.0 / model.temperature
    for _ in range(samples):
        site = int(rng.integers(0, k))
        proposal = values[int(rng.integers(0, len(values)))]
        old_value = state[site]
        old_terms = [terms[i] for i in affected[site]]
        state[site] = proposal
        new_terms = [_site_term(state, i, table, model.metric) for i in affected[site]]
        delta = sum(new_terms) - sum(old_terms)
        if delta <= 0 or rng.random() < math.exp(-delta * t_inv):
            for i, term in zip(affected[site], new_terms):
                terms[i] = term
        else:
            state[site] = old_value
        total += sum(terms)
    return total / samples / k


def _site_term(state: Sequence, i: int, table, metric: str) -> float:
    """Energy contribution of the single site ``i`` for the current state."""
    nbrs, total = table[i]
    if not nbrs:
        return 0.0
    vi = state[i]
    if isinstance(vi, (tuple, list)):
        pred = [0.0] * len(vi)
        for j, wt in nbrs:
            vj = state[j]
            for b in range(len(pred)):
                pred[b] += wt * vj[b]
        if metric == "euclidean":
            return sum((pb / total - vb) ** 2 for pb, vb in zip(pred, vi))
        return sum(abs(pb / total - vb) for pb, vb in zip(pred, vi)) ** 2
    pred = 0.0
    for j, wt in nbrs:
        pred += wt * state[j]
    return (pred / total - vi) ** 2


def neighborhood_squared(g: Window) -> Window:
    """Composition of the neighborhood relation with itself: the system
    with respect to which the autoregressive energy is a valid MRF energy."""
    return dilate(g, 2)
