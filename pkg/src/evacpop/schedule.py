"""Activity selection and sequencing.

Distribution tables give the share of a subgroup *doing* each activity per
step; agents need to know when to *start* things.  The start-share matrix is
derived recursively from the durations, turned into a per-step cumulative
matrix, sampled per agent and finally turned into a time-stamped day plan.

Matrices are indexed ``[activity, step]`` with 0-based indices; activity 0 is
home.  Times are in seconds from the start of the period.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import COLUMN_TOL, TimeGrid


@dataclass
class StartMatrix:
    xi: np.ndarray        # clamped start proportions
    raw: np.ndarray       # before clamping (negative where the input drops too fast)

    @property
    def column_sums(self) -> np.ndarray:
        return self.xi.sum(axis=0)

    @property
    def degenerate(self) -> np.ndarray:
        return self.column_sums <= COLUMN_TOL

    @property
    def xi_star(self) -> np.ndarray:
        sums = self.column_sums
        out = np.zeros_like(self.xi)
        ok = ~self.degenerate
        out[:, ok] = self.xi[:, ok] / sums[ok]
        return out


@dataclass
class CumulativeMatrix:
    c: np.ndarray
    degenerate: np.ndarray    # per step: no new activity can start


@dataclass
class SelectionMatrix:
    b: np.ndarray             # bool K x N, one True per column
    b_prime: np.ndarray       # int K x N, duration weight where a draw landed

    def activity_per_step(self) -> np.ndarray:
        return self.b.argmax(axis=0)


@dataclass
class DayPlanSkeleton:
    entries: list             # (start_time_seconds, activity_index)

    @property
    def times(self):
        return [t for t, _ in self.entries]

    @property
    def activities(self):
        return [k for _, k in self.entries]


def _start_recursion(delta, durations):
    delta = np.asarray(delta, dtype=float)
    durations = np.asarray(durations, dtype=int)
    K, N = delta.shape
    raw = np.zeros_like(delta)
    xi = np.zeros_like(delta)
    for k in range(K):
        d = int(durations[k])
        for n in range(N):
            # starts in the previous d-1 steps are still running at n
            running = xi[k, max(0, n - d + 1):n].sum()
            raw[k, n] = delta[k, n] - running
            xi[k, n] = max(raw[k, n], 0.0)
    return raw, xi


def raw_start_matrix(delta, durations) -> np.ndarray:
    return _start_recursion(delta, durations)[0]


def build_start_matrix(delta, durations) -> np.ndarray:
    """Start proportions Xi, negative entries clamped to zero.

    The clamped values feed the recursion for later steps, so a clamped step
    contributes no phantom starts downstream.
    """
    return _start_recursion(delta, durations)[1]


def start_matrix(delta, durations) -> StartMatrix:
    raw, xi = _start_recursion(delta, durations)
    return StartMatrix(xi=xi, raw=raw)


def cumulative_matrix(start) -> CumulativeMatrix:
    if not isinstance(start, StartMatrix):
        start = StartMatrix(xi=np.asarray(start, dtype=float), raw=np.asarray(start, dtype=float))
    c = np.cumsum(start.xi_star, axis=0)
    degenerate = start.degenerate.copy()
    c[-1, ~degenerate] = 1.0
    c[:, degenerate] = 0.0
    return CumulativeMatrix(c=c, degenerate=degenerate)


def draw_row(c_column: np.ndarray, u: float) -> int:
    """Row k with c[k-1] <= u < c[k]; a tie on a boundary goes to the next row."""
    k = int(np.searchsorted(c_column, u, side="right"))
    return min(k, len(c_column) - 1)


def select_activities(cm: CumulativeMatrix, durations, rng) -> SelectionMatrix:
    """Draw one feasible activity per step for a single agent.

    A drawn activity blocks the following ``d - 1`` steps (truncated at the
    end of the period).  At a degenerate step nobody starts anything, so the
    previous activity (home before step 1) carries over one step.
    """
    c = cm.c
    K, N = c.shape
    durations = np.asarray(durations, dtype=int)
    u = rng.random(N)
    b = np.zeros((K, N), dtype=bool)
    bp = np.zeros((K, N), dtype=int)
    block = 0
    prev = 0
    for n in range(N):
        if block > 0:
            b[prev, n] = True
            block -= 1
            continue
        if cm.degenerate[n]:
            b[prev, n] = True
            continue
        k = draw_row(c[:, n], u[n])
        b[k, n] = True
        bp[k, n] = durations[k]
        block = durations[k] - 1
        prev = k
    return SelectionMatrix(b=b, b_prime=bp)


def change_matrix(b: np.ndarray) -> np.ndarray:
    """F' : 1 where an activity begins at step n (the day starts at home)."""
    b = np.asarray(b, dtype=int)
    before = np.zeros_like(b[:, :1])
    before[0, 0] = 1
    f = np.diff(np.concatenate([before, b], axis=1), axis=1)
    return (f > 0).astype(int)


def sequence_plan(sel, grid: TimeGrid, rng) -> DayPlanSkeleton:
    """Turn a selection matrix into (start time, activity) entries.

    A change at step n starts at the step boundary plus a uniform jitter of up
    to half a step either way.  A negative time (only possible at step 1) is
    reflected to stay inside the period.  Home bookends at 0 and T are added.
    """
    b = sel.b if isinstance(sel, SelectionMatrix) else np.asarray(sel)
    fp = change_matrix(b)
    half = grid.step_length / 2.0
    entries = [(0.0, 0)]
    for n in range(fp.shape[1]):
        col = fp[:, n]
        if col.sum() == 1:
            k = int(np.flatnonzero(col)[0])
            t = grid.step_start(n + 1) + rng.uniform(-1.0, 1.0) * half
            t = min(abs(t), grid.period)
            entries.append((t, k))
    entries.append((grid.period, 0))
    return DayPlanSkeleton(entries)


def occupancy_at(times, activities, sample_times, end=None) -> np.ndarray:
    """Activity in progress at each sample time.

    ``times`` are start times (ascending); the activity starting at ``times[i]``
    runs until ``times[i + 1]``.
    """
    times = np.asarray(times, dtype=float)
    idx = np.searchsorted(times, np.asarray(sample_times, dtype=float), side="right") - 1
    idx = np.clip(idx, 0, len(times) - 1)
    return np.asarray(activities)[idx]


def skeleton_occupancy(skeleton: DayPlanSkeleton, grid: TimeGrid) -> np.ndarray:
    """Activity index per step, sampled at step midpoints."""
    return occupancy_at(skeleton.times[:-1], skeleton.activities[:-1], grid.midpoints())


def draw_day_plan(cm: CumulativeMatrix, durations, grid: TimeGrid, rng) -> DayPlanSkeleton:
    sel = select_activities(cm, durations, rng)
    return sequence_plan(sel, grid, rng)
