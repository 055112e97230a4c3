"""Per-agent bushfire-response attributes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import io
from .io import Attribute
from .model import BehaviourParams
from .places import CentroidIndex


@dataclass(frozen=True)
class BdiAttributes:
    bdi_agent_type: str
    init_threshold: float
    act_threshold: float
    has_dependant: bool = False
    dependant_location: tuple | None = None
    go_home_after_dependants: bool = False
    go_home_before_leaving: bool = False
    evac_name: str = ""
    evac_location: tuple = (0.0, 0.0)
    invac_location: tuple = (0.0, 0.0)

    def check(self):
        if not self.init_threshold <= self.act_threshold:
            raise ValueError("INIT exceeds ACT")
        if self.go_home_after_dependants and self.go_home_before_leaving:
            raise ValueError("both go-home flags set")
        if self.has_dependant != (self.dependant_location is not None):
            raise ValueError("dependant flag and location disagree")

    def to_attributes(self) -> list:
        dep = "" if self.dependant_location is None else _xy(self.dependant_location)
        return [
            Attribute(io.BDI_AGENT_TYPE, io.STRING, self.bdi_agent_type),
            Attribute(io.DEPENDANT_LOCATION, io.STRING, dep),
            Attribute(io.INIT_THRESHOLD, io.DOUBLE, repr(float(self.init_threshold))),
            Attribute(io.ACT_THRESHOLD, io.DOUBLE, repr(float(self.act_threshold))),
            Attribute(io.GO_HOME_AFTER_DEPENDANTS, io.BOOLEAN, _bool(self.go_home_after_dependants)),
            Attribute(io.GO_HOME_BEFORE_LEAVING, io.BOOLEAN, _bool(self.go_home_before_leaving)),
            Attribute(io.EVAC_PREFERENCE, io.STRING, f"{self.evac_name},{_xy(self.evac_location)}"),
            Attribute(io.INVAC_PREFERENCE, io.STRING, f",{_xy(self.invac_location)}"),
        ]

    @classmethod
    def from_person(cls, person) -> "BdiAttributes":
        """Rebuild from a parsed person; raises KeyError if the block is incomplete."""
        get = {a.name: a.value for a in person.attributes}
        dep = get[io.DEPENDANT_LOCATION].strip()
        evac_name, ex, ey = get[io.EVAC_PREFERENCE].rsplit(",", 2)
        _, ix, iy = get[io.INVAC_PREFERENCE].rsplit(",", 2)
        return cls(
            bdi_agent_type=get[io.BDI_AGENT_TYPE],
            init_threshold=float(get[io.INIT_THRESHOLD]),
            act_threshold=float(get[io.ACT_THRESHOLD]),
            has_dependant=bool(dep),
            dependant_location=_parse_xy(dep) if dep else None,
            go_home_after_dependants=get[io.GO_HOME_AFTER_DEPENDANTS].strip() == "true",
            go_home_before_leaving=get[io.GO_HOME_BEFORE_LEAVING].strip() == "true",
            evac_name=evac_name,
            evac_location=(float(ex), float(ey)),
            invac_location=(float(ix), float(iy)),
        )


def _xy(p) -> str:
    return f"{float(p[0])!r},{float(p[1])!r}"


def _parse_xy(text: str) -> tuple:
    x, y = text.split(",")
    return float(x), float(y)


def _bool(v: bool) -> str:
    return "true" if v else "false"


def draw_thresholds(params: BehaviourParams, rng) -> tuple[float, float]:
    """(INIT, ACT).  Agents who may stay get two ordered uniforms; others one."""
    lo, hi = params.threshold_min, params.threshold_max
    if params.stay:
        a, b = rng.uniform(lo, hi, size=2)
        return float(min(a, b)), float(max(a, b))
    v = float(rng.uniform(lo, hi))
    return v, v


def assign_dependant(params: BehaviourParams, home_xy, candidates: np.ndarray, rng):
    """Draw whether the agent has a dependant and, if so, where.

    ``candidates`` is an (M, 2) array of dependant-tagged locations.  Within the
    radius the choice is uniform; otherwise the nearest candidate; with no
    candidates at all, a uniform point in the disc around home.
    """
    if not rng.random() < params.prob_of_dependant:
        return False, None
    hx, hy = float(home_xy[0]), float(home_xy[1])
    r = params.dependant_radius
    if len(candidates):
        d = np.hypot(candidates[:, 0] - hx, candidates[:, 1] - hy)
        near = np.flatnonzero(d <= r)
        if near.size:
            j = int(near[rng.integers(near.size)])
        else:
            j = int(np.argmin(d))
        return True, (float(candidates[j, 0]), float(candidates[j, 1]))
    rho = r * np.sqrt(rng.random())
    theta = rng.uniform(0.0, 2 * np.pi)
    return True, (hx + rho * np.cos(theta), hy + rho * np.sin(theta))


def choose_go_home_flags(params: BehaviourParams, has_dependant: bool, rng) -> tuple[bool, bool]:
    """(after_dependants, before_leaving); at most one is set."""
    if rng.random() < params.prob_of_go_home:
        return (True, False) if has_dependant else (False, True)
    return False, False


class RefugeIndex:
    """Refuges grouped for invacuation lookups and evacuation draws."""

    def __init__(self, refuges, centroids: CentroidIndex):
        if refuges is None or len(refuges) == 0:
            raise ValueError("refuge set is empty")
        self.refuges = refuges
        self.xy = np.column_stack([refuges.x, refuges.y])
        self.locality = np.asarray(refuges.locality, dtype=object)
        self.centroids = centroids
        names = sorted(set(refuges.locality))
        self.names = names
        cap = {n: 0 for n in names}
        for n, c in zip(refuges.locality, refuges.capacity):
            cap[n] += int(c)
        self.capacity = np.array([cap[n] for n in names], dtype=float)
        # destination is the locality centre; refuge-only localities use their refuges' mean
        centres = []
        for n in names:
            if n in centroids.names:
                centres.append(centroids.xy[centroids.index(n)])
            else:
                centres.append(self.xy[self.locality == n].mean(axis=0))
        self.centres = np.array(centres, dtype=float)
        self._by_locality = {n: np.flatnonzero(self.locality == n) for n in names}

    def centre_of(self, locality: str) -> np.ndarray:
        if locality in self.centroids.names:
            return self.centroids.xy[self.centroids.index(locality)]
        return self.centres[self.names.index(locality)]

    def invac(self, home_xy, home_locality: str) -> tuple:
        idx = self._by_locality.get(home_locality)
        if idx is None or idx.size == 0:
            idx = np.arange(len(self.xy))
        d = np.hypot(self.xy[idx, 0] - home_xy[0], self.xy[idx, 1] - home_xy[1])
        j = int(idx[np.argmin(d)])
        return float(self.xy[j, 0]), float(self.xy[j, 1])

    def evac_probabilities(self, home_locality: str) -> np.ndarray:
        origin = self.centre_of(home_locality)
        d = np.hypot(self.centres[:, 0] - origin[0], self.centres[:, 1] - origin[1])
        w = d * self.capacity
        w[[n == home_locality for n in self.names]] = 0.0
        total = w.sum()
        if total <= 0:
            raise ValueError(f"no evacuation locality available from {home_locality!r}")
        return w / total

    def evac(self, home_locality: str, rng) -> tuple[str, tuple]:
        p = self.evac_probabilities(home_locality)
        i = min(int(np.searchsorted(np.cumsum(p), rng.random(), side="right")), len(p) - 1)
        c = self.centres[i]
        return self.names[i], (float(c[0]), float(c[1]))


def choose_invac_preference(home_xy, home_locality: str, refuges: RefugeIndex) -> tuple:
    return refuges.invac(home_xy, home_locality)


def choose_evac_preference(home_locality: str, refuges: RefugeIndex, rng) -> tuple[str, tuple]:
    return refuges.evac(home_locality, rng)


def draw_attributes(bdi_agent_type: str, params: BehaviourParams, home_xy, home_locality: str,
                    dependant_candidates: np.ndarray, refuges: RefugeIndex, rng) -> BdiAttributes:
    init, act = draw_thresholds(params, rng)
    has_dep, dep = assign_dependant(params, home_xy, dependant_candidates, rng)
    after, before = choose_go_home_flags(params, has_dep, rng)
    evac_name, evac_xy = choose_evac_preference(home_locality, refuges, rng)
    invac = choose_invac_preference(home_xy, home_locality, refuges)
    return BdiAttributes(
        bdi_agent_type=bdi_agent_type, init_threshold=init, act_threshold=act,
        has_dependant=has_dep, dependant_location=dep,
        go_home_after_dependants=after, go_home_before_leaving=before,
        evac_name=evac_name, evac_location=evac_xy, invac_location=invac,
    )
