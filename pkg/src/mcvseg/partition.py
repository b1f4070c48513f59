"""Partitions as dense label maps: the block-merging operator, the
sequential connected-component algorithm built on it, and the windowed
merge operation used by the level driver.

A partition lives on the whole lattice or on a subset of it; pixels
outside the domain carry the reserved ABSENT marker. Blocks are the
maximal sets of pixels sharing a label. No region lists are kept between
operations: adjacency is always recomputed locally from the label map.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import Lattice, Pixel, Window
from .pnmio import LabelImage

ABSENT = -1


@dataclass
class Partition:
    """Dense label-map representation of a partition.

    ``labels[row, col]`` is the 0-based storage for the 1-based (col, row)
    lattice; ABSENT marks pixels outside the partition's domain.
    """

    lattice: Lattice
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int32)
        expected = (self.lattice.height, self.lattice.width)
        if self.labels.shape != expected:
            raise ValueError(f"label array shape {self.labels.shape} != {expected}")

    def copy(self) -> Partition:
        return Partition(self.lattice, self.labels.copy())

    @property
    def is_total(self) -> bool:
        return bool(np.all(self.labels != ABSENT))

    def label_at(self, x: Pixel) -> int:
        c, r = x
        return int(self.labels[r - 1, c - 1])

    def block_count(self) -> int:
        present = self.labels[self.labels != ABSENT]
        return int(np.unique(present).size)

    def present_pixels(self) -> set[Pixel]:
        rows, cols = np.nonzero(self.labels != ABSENT)
        return {(int(c) + 1, int(r) + 1) for r, c in zip(rows, cols)}

    def blocks(self) -> dict[int, set[Pixel]]:
        """Label -> block pixel set. Intended for small partitions and tests."""
        out: dict[int, set[Pixel]] = {}
        rows, cols = np.nonzero(self.labels != ABSENT)
        for r, c in zip(rows, cols):
            out.setdefault(int(self.labels[r, c]), set()).add((int(c) + 1, int(r) + 1))
        return out

    def to_label_image(self) -> LabelImage:
        if not self.is_total:
            raise ValueError("partition has absent pixels; cannot emit a total label image")
        return LabelImage(self.lattice, self.labels.copy())

    @classmethod
    def from_label_image(cls, lm: LabelImage) -> Partition:
        return cls(lm.lattice, lm.labels.copy())


def _clipped(shape: tuple[int, int], x: Pixel, win: Window):
    """Array slices plus window-shape mask selecting (x + win) within the
    lattice, in 0-based array coordinates."""
    h, w = shape
    c0, r0 = x[0] - 1, x[1] - 1
    bx0, bx1, by0, by1 = win.bbox()
    mask = win.mask()
    rlo, rhi = r0 + by0, r0 + by1
    clo, chi = c0 + bx0, c0 + bx1
    rlo_c, rhi_c = max(rlo, 0), min(rhi, h - 1)
    clo_c, chi_c = max(clo, 0), min(chi, w - 1)
    sub = mask[rlo_c - rlo : rhi_c - rlo + 1, clo_c - clo : chi_c - clo + 1]
    return slice(rlo_c, rhi_c + 1), slice(clo_c, chi_c + 1), sub


def singletons(S: Iterable[Pixel], lat: Lattice) -> Partition:
    """Partition of S into single-pixel blocks, labeled in raster order."""
    labels = np.full((lat.height, lat.width), ABSENT, dtype=np.int32)
    ordered = sorted(set(S), key=lambda p: (p[1], p[0]))
    for i, (c, r) in enumerate(ordered):
        if (c, r) not in lat:
            raise ValueError(f"pixel {(c, r)} outside {lat.width}x{lat.height} lattice")
        labels[r - 1, c - 1] = i
    return Partition(lat, labels)


def singletons_full(lat: Lattice) -> Partition:
    """Every lattice pixel its own block; labels are raster indices."""
    labels = np.arange(lat.size, dtype=np.int32).reshape(lat.height, lat.width)
    return Partition(lat, labels)


def m_step(x: Pixel, p: Partition, w0: Window) -> Partition:
    """One application of the block-merging operator at ``x``: every block
    meeting the clipped w0-window of ``x`` (within the domain) fuses into
    the block of ``x``; all other blocks pass through.

    The result is a partition of the same domain, coarser than or equal to
    the input, and it preserves connectedness of blocks.
    """
    if p.label_at(x) == ABSENT:
        raise ValueError(f"pixel {x} is not in the partition domain")
    rs, cs, sub = _clipped(p.labels.shape, x, w0)
    window_labels = p.labels[rs, cs][sub]
    members = np.unique(window_labels[window_labels != ABSENT])
    target = p.label_at(x)
    out = p.labels.copy()
    if members.size > 1:
        out[np.isin(out, members[members != target])] = target
    return Partition(p.lattice, out)


def _fuse_at(labels: np.ndarray, blocks: list[list[int]], sizes: list[int],
             win_rs, win_cs, win_sub) -> None:
    """In-place operator step on the list-backed label map: fuse every
    block with a pixel in the clipped window into the largest of them.
    Relabeling smaller blocks into the largest keeps total relabel work
    O(N log N) over a full run."""
    window_labels = labels[win_rs, win_cs][win_sub]
    members = np.unique(window_labels[window_labels != ABSENT])
    if members.size < 2:
        return
    target = int(members[0])
    for lab in members[1:]:
        if sizes[int(lab)] > sizes[target]:
            target = int(lab)
    view = labels.ravel()
    for lab in members:
        lab = int(lab)
        if lab == target:
            continue
        for f in blocks[lab]:
            view[f] = target
        blocks[target].extend(blocks[lab])
        sizes[target] += sizes[lab]
        blocks[lab] = []
        sizes[lab] = 0


def connected_components(S: Iterable[Pixel], w0: Window,
                         order: Sequence[Pixel], lat: Lattice) -> Partition:
    """Connected components of S under w0-adjacency, computed by repeated
    application of the merging operator along ``order``.

    ``order`` must be a permutation of S. The final partition is the same
    for every choice of order.
    """
    pixel_set = set(S)
    if len(order) != len(pixel_set) or set(order) != pixel_set:
        raise ValueError("order must be a permutation of S")
    p = singletons(pixel_set, lat)
    labels = p.labels
    width = lat.width
    blocks: list[list[int]] = []
    sizes: list[int] = []
    for c, r in sorted(pixel_set, key=lambda q: (q[1], q[0])):
        blocks.append([(r - 1) * width + (c - 1)])
        sizes.append(1)
    for x in order:
        rs, cs, sub = _clipped(labels.shape, x, w0)
        _fuse_at(labels, blocks, sizes, rs, cs, sub)
    return Partition(lat, labels)


def components_by_class(cm: LabelImage, w0: Window) -> Partition:
    """Connected components of every constant-class set of a class map,
    combined into one total partition. Blocks never mix classes."""
    lat = cm.lattice
    out = np.full((lat.height, lat.width), ABSENT, dtype=np.int32)
    next_label = 0
    for cls in np.unique(cm.labels):
        rows, cols = np.nonzero(cm.labels == cls)
        pixels = [(int(c) + 1, int(r) + 1) for r, c in zip(rows, cols)]
        part = connected_components(pixels, w0, pixels, lat)
        sub = part.labels != ABSENT
        relabeled, inverse = np.unique(part.labels[sub], return_inverse=True)
        out[sub] = inverse.astype(np.int32) + next_label
        next_label += relabeled.size
    return Partition(lat, out)


def _merge_targets(labels: np.ndarray, x: Pixel, w0: Window) -> np.ndarray:
    rs, cs, sub = _clipped(labels.shape, x, w0)
    return np.unique(labels[rs, cs][sub])


def _relabel(labels: np.ndarray, rs: slice, cs: slice, sub: np.ndarray | None,
             targets: np.ndarray, fresh: int, workers: int = 1) -> None:
    """Relabel pass over a clipped window slice: pixels whose label is in
    ``targets`` (and under ``sub`` when given) take the fresh merged-block
    label. Each pixel's new value depends only on its own old label and the
    precomputed target set, so the pass may be tiled across workers with
    identical results."""
    region = labels[rs, cs]
    if workers <= 1 or region.shape[0] < 2:
        sel = np.isin(region, targets)
        if sub is not None:
            sel &= sub
        region[sel] = fresh
        return
    bands = np.array_split(np.arange(region.shape[0]), min(workers, region.shape[0]))

    def relabel_band(rows):
        band = region[rows[0] : rows[-1] + 1]
        sel = np.isin(band, targets)
        if sub is not None:
            sel &= sub[rows[0] : rows[-1] + 1]
        band[sel] = fresh

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(relabel_band, [b for b in bands if b.size]))


def _merge_apply(labels: np.ndarray, x: Pixel, psi: Window,
                 targets: np.ndarray, fresh: int, workers: int = 1) -> None:
    rs, cs, sub = _clipped(labels.shape, x, psi)
    _relabel(labels, rs, cs, sub, targets, fresh, workers)


def merge_step(x: Pixel, p: Partition, w0: Window, psi: Window) -> Partition:
    """Windowed merge at ``x``: blocks meeting the w0-window contribute
    their pixels inside the psi-window to one new block; what falls outside
    the psi-window stays behind as residue blocks under the old labels.

    The merged block always contains ``x``; residues may be disconnected
    and empty residues vanish. Regions can split as well as merge, so the
    result need not be coarser than the input.
    """
    if x not in p.lattice:
        raise ValueError(f"pixel {x} outside {p.lattice.width}x{p.lattice.height} lattice")
    if not p.is_total:
        raise ValueError("merge_step requires a total partition")
    out = p.labels.copy()
    targets = _merge_targets(out, x, w0)
    _merge_apply(out, x, psi, targets, int(out.max()) + 1)
    return Partition(p.lattice, out)


def merge_step_parallel(x: Pixel, p: Partition, w0: Window, psi: Window,
                        workers: int) -> Partition:
    """merge_step with the relabel pass tiled over ``workers`` row bands.

    Bitwise identical to merge_step for every worker count: the target
    label set is snapshotted before the pass and writes are per-pixel
    independent.
    """
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    if x not in p.lattice:
        raise ValueError(f"pixel {x} outside {p.lattice.width}x{p.lattice.height} lattice")
    if not p.is_total:
        raise ValueError("merge_step_parallel requires a total partition")
    out = p.labels.copy()
    targets = _merge_targets(out, x, w0)
    _merge_apply(out, x, psi, targets, int(out.max()) + 1, workers=workers)
    return Partition(p.lattice, out)


def canonicalize(p: Partition) -> Partition:
    """Renumber labels 0, 1, 2, ... by first occurrence in raster order.

    Two partitions are equivalent labelings iff their canonical forms have
    identical label arrays. Idempotent; absent pixels stay absent.
    """
    flat = p.labels.ravel()
    mask = flat != ABSENT
    out = np.full_like(flat, ABSENT)
    if mask.any():
        uniq, first_idx, inverse = np.unique(flat[mask], return_index=True, return_inverse=True)
        rank = np.empty(uniq.size, dtype=np.int32)
        rank[np.argsort(first_idx, kind="stable")] = np.arange(uniq.size, dtype=np.int32)
        out[mask] = rank[inverse]
    return Partition(p.lattice, out.reshape(p.labels.shape))


def same_partition(p1: Partition, p2: Partition) -> bool:
    """True iff the two partitions are equal up to relabeling."""
    if p1.lattice != p2.lattice:
        return False
    return bool(np.array_equal(canonicalize(p1).labels, canonicalize(p2).labels))
