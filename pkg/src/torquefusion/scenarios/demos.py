"""
Demonstration records, preprocessing, and dynamic time warping.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.spatial.distance import cdist

from ..errors import ContractError

FIELDS = ("q", "qdot", "x", "xdot", "F")


@dataclass(frozen=True)
class Demonstration:
    """Time-indexed samples of one demonstration.

    ``phase_labels`` are for evaluation only and are never used for training
    or control.
    """
    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    F: np.ndarray
    demo_id: int = 0
    phase_labels: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        if t.size == 0:
            raise ContractError("a demonstration needs at least one sample")
        if np.any(np.diff(t) <= 0):
            raise ContractError("demonstration time stamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        for name in FIELDS:
            value = np.asarray(getattr(self, name), dtype=float)
            value = value.reshape(t.size, -1)
            object.__setattr__(self, name, value)
        if self.phase_labels is not None:
            object.__setattr__(self, "phase_labels", np.asarray(self.phase_labels))

    def __len__(self):
        return self.t.size

    @property
    def n(self):
        return self.q.shape[1]

    def channels(self):
        """Stacked signals ``[q, qdot, x, xdot, F]``; DTW channel indices refer to these columns."""
        return np.hstack([getattr(self, name) for name in FIELDS])

    def channel_index(self, name, k=0):
        offset = 0
        for field in FIELDS:
            width = getattr(self, field).shape[1]
            if field == name:
                return offset + k
            offset += width
        raise KeyError(name)

    def with_channels(self, t, data, phase_labels=None):
        parts = {}
        offset = 0
        for name in FIELDS:
            width = getattr(self, name).shape[1]
            parts[name] = data[:, offset:offset + width]
            offset += width
        return Demonstration(t=t, demo_id=self.demo_id, phase_labels=phase_labels, **parts)


def moving_average(signal, window):
    """Centred moving average along the first axis; edges use nearest-value padding."""
    if window <= 1:
        return np.asarray(signal, dtype=float)
    return uniform_filter1d(np.asarray(signal, dtype=float), size=window, axis=0, mode="nearest")


def filter_and_subsample(demo, samples, window=5):
    """Low-pass every channel, then keep ``samples`` evenly spaced rows."""
    if samples > len(demo):
        raise ContractError("cannot subsample to more points than recorded")
    smooth = moving_average(demo.channels(), window)
    idx = np.round(np.linspace(0, len(demo) - 1, samples)).astype(int)
    labels = None if demo.phase_labels is None else demo.phase_labels[idx]
    return demo.with_channels(demo.t[idx], smooth[idx], labels)


def dtw_path(reference, other):
    """Optimal warping path between two sequences of feature rows.

    Euclidean local cost, symmetric unit-weight steps (diagonal, horizontal,
    vertical).  Returns ``(path, total_cost)`` with ``path`` an (L, 2) array of
    index pairs.
    """
    a = np.asarray(reference, dtype=float)
    b = np.asarray(other, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if len(a) == 0 or len(b) == 0:
        raise ContractError("DTW needs non-empty sequences")
    cost = cdist(a, b)
    N, M = cost.shape
    acc = np.full((N + 1, M + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, N + 1):
        row, prev = acc[i], acc[i - 1]
        c = cost[i - 1]
        for j in range(1, M + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if row[j - 1] < best:
                best = row[j - 1]
            row[j] = c[j - 1] + best
    i, j = N, M
    path = [(N - 1, M - 1)]
    while i > 1 or j > 1:
        candidates = (acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
        move = int(np.argmin(candidates))  # ties prefer the diagonal
        if move == 0:
            i, j = i - 1, j - 1
        elif move == 1:
            i -= 1
        else:
            j -= 1
        path.append((i - 1, j - 1))
    return np.array(path[::-1]), float(acc[N, M])


def warp_onto(path, values, length):
    """Re-time ``values`` (indexed by the path's second column) onto ``length`` reference samples,
    averaging many-to-one matches."""
    values = np.asarray(values, dtype=float)
    sums = np.zeros((length,) + values.shape[1:])
    counts = np.zeros(length)
    np.add.at(sums, path[:, 0], values[path[:, 1]])
    np.add.at(counts, path[:, 0], 1.0)
    return sums / counts.reshape((-1,) + (1,) * (values.ndim - 1))


def dtw_align(reference, other, channels):
    """Re-time ``other`` onto ``reference``'s time base.

    The warping path is computed on the selected columns of
    :meth:`Demonstration.channels`; all signals of ``other`` are then
    projected along it.
    """
    channels = list(channels)
    if not channels:
        raise ContractError("dtw_align needs at least one channel")
    ref_data = reference.channels()
    other_data = other.channels()
    path, _ = dtw_path(ref_data[:, channels], other_data[:, channels])
    warped = warp_onto(path, other_data, len(reference))
    labels = None
    if other.phase_labels is not None:
        first = np.full(len(reference), -1)
        for i, j in path[::-1]:
            first[i] = j
        labels = other.phase_labels[first]
    return replace(reference.with_channels(reference.t, warped, labels), demo_id=other.demo_id)
