"""Home and activity location assignment.

Localities are summarised by the centroid of their member locations.  The
next locality is drawn with a gravity-style weight (allocation mass over
centroid distance); the agent's current locality gets a pseudo-distance
chosen so that, with equal masses, it is kept with probability ``1 - g``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .io import LocationTable


class CapacityError(RuntimeError):
    """Home assignment ran out of allocation."""


def distance_matrix(xy: np.ndarray) -> np.ndarray:
    """Euclidean distances between all rows of ``xy``."""
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


@dataclass
class CentroidIndex:
    names: list
    xy: np.ndarray      # I x 2
    dist: np.ndarray    # I x I

    def __len__(self):
        return len(self.names)

    def index(self, name) -> int:
        return self.names.index(name)


def compute_centroids(locations: LocationTable) -> CentroidIndex:
    names = list(locations.locality_names)
    I = len(names)
    if len(locations) == 0:
        raise ValueError("no locations")
    counts = np.bincount(locations.locality_index, minlength=I)
    if np.any(counts == 0):
        raise ValueError("empty locality")
    cx = np.bincount(locations.locality_index, weights=locations.x, minlength=I) / counts
    cy = np.bincount(locations.locality_index, weights=locations.y, minlength=I) / counts
    xy = np.column_stack([cx, cy])
    dist = distance_matrix(xy)
    off = ~np.eye(I, dtype=bool)
    if np.any(dist[off] == 0):
        i, j = np.argwhere((dist == 0) & off)[0]
        raise ValueError(f"localities {names[i]!r} and {names[j]!r} share a centroid")
    return CentroidIndex(names, xy, dist)


def pseudo_distance(g: float, other_distances) -> float:
    """Self-distance for the current locality.

    Returns 0.0 when there is nowhere else to go or ``g == 0``; callers treat
    that as "stay with certainty".
    """
    if not 0.0 <= g < 1.0:
        raise ValueError(f"travel factor must lie in [0, 1), got {g}")
    d = np.asarray(other_distances, dtype=float)
    if d.size == 0 or g == 0.0:
        return 0.0
    return (g / (1.0 - g)) / np.sum(1.0 / d)


def locality_weights(current: int, masses: np.ndarray, dist: np.ndarray, g: float) -> np.ndarray:
    """Probability of moving from locality ``current`` to each locality.

    ``masses`` holds the summed allocation of eligible locations per locality;
    ``dist`` is the centroid distance matrix.
    """
    masses = np.asarray(masses, dtype=float)
    if masses.sum() <= 0:
        raise ValueError("no eligible location in any locality")
    others = masses > 0
    others[current] = False
    d0 = pseudo_distance(g, dist[current, others])
    w = np.zeros_like(masses)
    w[others] = masses[others] / dist[current, others]
    if masses[current] > 0:
        if d0 == 0.0:
            w[:] = 0.0
            w[current] = 1.0
        else:
            w[current] = masses[current] / d0
    return w / w.sum()


@dataclass
class ActivityChooser:
    """Precomputed draws for one (subgroup, activity) pair."""

    loc_cum: np.ndarray            # I_current x I cumulative locality probabilities
    members: list                  # per locality: eligible location indices
    member_cum: list               # per locality: cumulative within-locality weights (or None)

    def draw(self, current_locality: int, rng) -> int:
        row = self.loc_cum[current_locality]
        i = min(int(np.searchsorted(row, rng.random(), side="right")), len(row) - 1)
        idx = self.members[i]
        cum = self.member_cum[i]
        if cum is None:
            return int(idx[rng.integers(len(idx))])
        j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return int(idx[min(j, len(idx) - 1)])


def build_chooser(locations: LocationTable, centroids: CentroidIndex, mask: np.ndarray,
                  g: float, weighted: bool = True) -> ActivityChooser:
    I = len(centroids)
    li = locations.locality_index
    alloc = locations.allocation.astype(float)
    masses = np.bincount(li[mask], weights=alloc[mask], minlength=I)
    loc_cum = np.zeros((I, I))
    for i in range(I):
        loc_cum[i] = np.cumsum(locality_weights(i, masses, centroids.dist, g))
        loc_cum[i, -1] = 1.0
    members, member_cum = [], []
    for i in range(I):
        idx = np.flatnonzero(mask & (li == i))
        members.append(idx)
        if weighted:
            cum = np.cumsum(alloc[idx])
            member_cum.append(cum if cum.size and cum[-1] > 0 else None)
        else:
            member_cum.append(None)
    return ActivityChooser(loc_cum, members, member_cum)


@dataclass
class AllocationLedger:
    """Remaining home capacity per location."""

    remaining: np.ndarray
    initial: np.ndarray = field(init=False)

    def __post_init__(self):
        self.remaining = np.array(self.remaining, dtype=np.int64)
        self.initial = self.remaining.copy()

    @classmethod
    def from_locations(cls, locations: LocationTable):
        return cls(locations.allocation)

    @property
    def assigned(self) -> np.ndarray:
        return self.initial - self.remaining


class HomeAssigner:
    """Sequential home draws for one subgroup against a shared ledger.

    The locality is uniform over localities that still have home capacity for
    this subgroup; the location within it is weighted by remaining capacity.
    """

    def __init__(self, ledger: AllocationLedger, locations: LocationTable, mask: np.ndarray,
                 n_localities: int, subgroup: str = ""):
        self.ledger = ledger
        self.subgroup = subgroup
        li = locations.locality_index
        self.members = [np.flatnonzero(mask & (li == i)) for i in range(n_localities)]
        self.left = np.array([ledger.remaining[m].sum() for m in self.members], dtype=np.int64)

    def assign(self, rng) -> int:
        open_ = np.flatnonzero(self.left > 0)
        if open_.size == 0:
            name = f" for subgroup {self.subgroup!r}" if self.subgroup else ""
            raise CapacityError(f"home capacity exhausted{name}")
        i = int(open_[rng.integers(open_.size)])
        idx = self.members[i]
        cum = np.cumsum(self.ledger.remaining[idx])
        j = int(np.searchsorted(cum, rng.integers(cum[-1]), side="right"))
        loc = int(idx[j])
        self.ledger.remaining[loc] -= 1
        self.left[i] -= 1
        return loc


def assign_home(assigner: HomeAssigner, rng) -> int:
    return assigner.assign(rng)


def assign_locations(activities, home: int, choosers: dict, locality_index: np.ndarray, rng) -> list:
    """Location index per skeleton entry.

    ``activities`` are activity indices in plan order (bookends included).
    Home entries always resolve to ``home``; any other activity is drawn from
    the locality the agent currently occupies.
    """
    out = []
    current = home
    for k in activities:
        if k == 0:
            loc = home
        else:
            loc = choosers[k].draw(int(locality_index[current]), rng)
        out.append(loc)
        current = loc
    return out
