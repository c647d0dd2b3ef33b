"""Continuous-time corner-flip heat-bath dynamics.

Event-driven exact simulation of the reversible chain: waiting times are
exponential in the total flip rate and sites are picked proportionally
to their rates from an updatable Fenwick-tree sampler, so trajectories
are distributed exactly as the CTMC (no time discretisation).  After a
flip only the three neighbouring sites can change their rates, except
that the pinned restriction couples the last remaining contact to the
global contact count, which is handled explicitly.

Rates follow the heat-bath table: 1/2 for flips that do not touch the
wall, lambda/(lambda+1) for flips creating a contact, 1/(lambda+1) for
flips removing one, 0 where the flip would dip below the wall.  The
chain is reversible with respect to weights lambda**(number of contacts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import Path, contacts as contact_count, validate_path

#: rebuild the Fenwick tree from scratch this often to stop float drift
_REBUILD_EVERY = 1 << 20


def site_rate(h_left: int, h: int, h_right: int, lam: float) -> float:
    """Flip rate of a single site given its local height pattern."""
    if h_left != h_right:
        return 0.0
    if h_left == 0:
        return 0.0
    if h == 0:
        return 1.0 / (lam + 1.0)
    if h_left == 1 and h == 2:
        return lam / (lam + 1.0)
    return 0.5


@dataclass
class RateVector:
    """Per-site flip rates r_x for x in 1..n-1 (index x-1) and their sum."""

    rates: np.ndarray
    total: float


def rates(eta: Path, lam: float, restriction=None) -> RateVector:
    """Rate vector of a configuration, optionally under a restriction.

    ``restriction`` is None, "free", "pinned" or a window pair (l, r);
    restricted chains cancel every flip whose result leaves the subset.
    """
    n = len(eta) - 1
    zeros = contact_count(eta)
    vals = np.zeros(n - 1)
    for x in range(1, n):
        vals[x - 1] = _restricted_rate(eta, x, lam, restriction, zeros)
    return RateVector(vals, float(vals.sum()))


def _restricted_rate(h, x, lam, restriction, zeros):
    r = site_rate(h[x - 1], h[x], h[x + 1], lam)
    if r == 0.0 or restriction is None:
        return r
    new_h = h[x - 1] + h[x + 1] - h[x]
    if restriction == "free":
        if new_h == 0:
            return 0.0
    elif restriction == "pinned":
        if h[x] == 0 and zeros == 1:
            return 0.0
    else:
        l, r_edge = restriction
        if new_h == 0 and not l <= x <= r_edge:
            return 0.0
        if h[x] == 0 and (x == l or x == r_edge):
            return 0.0
    return r


class FenwickSampler:
    """Fenwick tree over non-negative weights with prefix-sum sampling."""

    def __init__(self, weights):
        self.n = len(weights)
        self.weights = list(weights)
        self._build()

    def _build(self):
        self.tree = [0.0] * (self.n + 1)
        for i, w in enumerate(self.weights):
            j = i + 1
            while j <= self.n:
                self.tree[j] += w
                j += j & (-j)
        self.total = sum(self.weights)

    def set(self, i: int, w: float):
        delta = w - self.weights[i]
        if delta == 0.0:
            return
        self.weights[i] = w
        self.total += delta
        j = i + 1
        while j <= self.n:
            self.tree[j] += delta
            j += j & (-j)

    def pick(self, u: float) -> int:
        """Index i with cumulative weight straddling u * total."""
        target = u * self.total
        idx = 0
        mask = 1 << (self.n.bit_length() - 1) if self.n else 0
        while mask:
            nxt = idx + mask
            if nxt <= self.n and self.tree[nxt] < target:
                target -= self.tree[nxt]
                idx = nxt
            mask >>= 1
        return min(idx, self.n - 1)


@dataclass
class Observation:
    time: float
    contacts: int
    min_height: int
    heights: Optional[Path] = None

    @property
    def pinned(self) -> bool:
        return self.min_height == 0


@dataclass
class TrajectoryLog:
    """Event record of one run plus observables sampled at fixed times."""

    initial: Path
    lam: float
    times: np.ndarray
    sites: np.ndarray
    final: Path
    observations: list = field(default_factory=list)
    restriction: object = None

    @property
    def n_events(self) -> int:
        return len(self.times)

    def replay(self):
        """Yield the path after every event (validation helper)."""
        h = list(self.initial)
        for x in self.sites:
            h[x] = h[x - 1] + h[x + 1] - h[x]
            yield tuple(h)


class _RandomBlocks:
    """Block-buffered exponential/uniform draws from a numpy Generator."""

    def __init__(self, rng, block=1 << 15):
        self.rng = rng
        self.block = block
        self._exp = []
        self._uni = []

    def exponential(self):
        if not self._exp:
            self._exp = self.rng.standard_exponential(self.block).tolist()
        return self._exp.pop()

    def uniform(self):
        if not self._uni:
            self._uni = self.rng.random(self.block).tolist()
        return self._uni.pop()


class Simulation:
    """Mutable state of one running chain; owned by a single thread."""

    def __init__(self, eta0: Path, lam: float, rng, restriction=None):
        validate_path(eta0)
        if restriction is not None:
            _check_membership(eta0, restriction)
        self.lam = lam
        self.h = list(eta0)
        self.n = len(eta0) - 1
        self.restriction = restriction
        self.zero_sites = {x for x, v in enumerate(eta0) if v == 0}
        self.t = 0.0
        self.events = 0
        self._rand = _RandomBlocks(rng)
        self.tree = FenwickSampler(
            [self._rate(x) for x in range(1, self.n)]
        )

    @property
    def zeros(self) -> int:
        return len(self.zero_sites)

    def _rate(self, x):
        return _restricted_rate(self.h, x, self.lam, self.restriction, self.zeros)

    def _refresh(self, sites):
        for x in sites:
            if 1 <= x <= self.n - 1:
                self.tree.set(x - 1, self._rate(x))

    def step(self):
        """Advance one event; returns (event time, flipped site)."""
        total = self.tree.total
        if total <= 0.0:
            raise RuntimeError("zero total rate: the chain is stuck")
        self.t += self._rand.exponential() / total
        x = _pick_site(self)
        _apply_flip(self, x)
        return self.t, x


def _check_membership(eta, restriction):
    if restriction == "free":
        ok = min(eta) > 0
    elif restriction == "pinned":
        ok = min(eta) == 0
    else:
        l, r = restriction
        zeros = [x for x, v in enumerate(eta) if v == 0]
        ok = bool(zeros) and zeros[0] == l and zeros[-1] == r
    if not ok:
        raise ValueError(f"initial path violates the {restriction!r} restriction")


def _as_predicate(target, sim):
    if target == "pinned":
        return lambda: len(sim.zero_sites) > 0
    if target == "free":
        return lambda: len(sim.zero_sites) == 0
    if callable(target):
        return lambda: target(sim.h)
    raise ValueError(f"unknown target {target!r}")


def _drive(sim, *, t_max=None, stop=None, observe_at=(), snapshots=False,
           keep_events=True, max_events=None):
    times, sites = [], []
    obs_times = sorted(observe_at)
    obs_idx = 0
    observations = []
    stop_fn = _as_predicate(stop, sim) if stop is not None else None

    def record_obs_until(limit):
        nonlocal obs_idx
        while obs_idx < len(obs_times) and obs_times[obs_idx] <= limit:
            observations.append(Observation(
                time=obs_times[obs_idx],
                contacts=len(sim.zero_sites),
                min_height=min(sim.h),
                heights=tuple(sim.h) if snapshots else None,
            ))
            obs_idx += 1

    stopped = False
    while True:
        if stop_fn is not None and stop_fn():
            stopped = True
            break
        if max_events is not None and sim.events >= max_events:
            break
        total = sim.tree.total
        if total <= 0.0:
            raise RuntimeError("zero total rate: the chain is stuck")
        # peek at the waiting time so observations can fire first
        dt = sim._rand.exponential() / total
        t_next = sim.t + dt
        record_obs_until(min(t_next, t_max) if t_max is not None else t_next)
        if t_max is not None and t_next > t_max:
            sim.t = t_max
            break
        sim.t = t_next
        x = _pick_site(sim)
        _apply_flip(sim, x)
        if keep_events:
            times.append(sim.t)
            sites.append(x)
        if obs_times and obs_idx >= len(obs_times) and t_max is None and stop_fn is None:
            break
    if t_max is not None:
        record_obs_until(t_max)
    return TrajectoryLog(
        initial=None, lam=sim.lam,
        times=np.array(times), sites=np.array(sites, dtype=np.int64),
        final=tuple(sim.h), observations=observations,
        restriction=sim.restriction,
    ), stopped


def _pick_site(sim):
    for _ in range(16):
        x = sim.tree.pick(sim._rand.uniform()) + 1
        if sim.tree.weights[x - 1] > 0.0:
            return x
    sim.tree._build()
    return sim.tree.pick(sim._rand.uniform()) + 1


def _apply_flip(sim, x):
    h = sim.h
    old = h[x]
    new = h[x - 1] + h[x + 1] - h[x]
    h[x] = new
    crossing = False
    if old == 0:
        sim.zero_sites.discard(x)
        crossing = sim.zeros == 1
    if new == 0:
        crossing = crossing or sim.zeros == 1
        sim.zero_sites.add(x)
    sim._refresh((x - 1, x, x + 1))
    if sim.restriction == "pinned" and crossing:
        sim._refresh([z for z in sim.zero_sites if z not in (x - 1, x, x + 1)])
    sim.events += 1
    if sim.events % _REBUILD_EVERY == 0:
        sim.tree._build()


def simulate(eta0: Path, lam: float, rng, *, t_max=None, stop=None,
             observe_at=(), snapshots=False, keep_events=True,
             max_events=None) -> TrajectoryLog:
    """Run the unrestricted chain from eta0.

    The horizon is a time ``t_max``, a ``stop`` predicate (callable on the
    height list, or "pinned"/"free"), or an event budget; at least one
    must be given.  Observables are recorded at the times in
    ``observe_at`` (state taken right before the next event).
    """
    if t_max is None and stop is None and max_events is None and not observe_at:
        raise ValueError("need a horizon: t_max, stop or max_events")
    sim = Simulation(eta0, lam, rng)
    log, _ = _drive(sim, t_max=t_max, stop=stop, observe_at=observe_at,
                    snapshots=snapshots, keep_events=keep_events,
                    max_events=max_events)
    log.initial = tuple(eta0)
    return log


def simulate_restricted(eta0: Path, lam: float, subset, rng, *, t_max=None,
                        stop=None, observe_at=(), snapshots=False,
                        keep_events=True, max_events=None) -> TrajectoryLog:
    """Run the chain with transitions leaving ``subset`` cancelled.

    subset is "free", "pinned" or a window pair (l, r); the stationary
    law is the Gibbs measure conditioned on the subset.
    """
    if t_max is None and stop is None and max_events is None and not observe_at:
        raise ValueError("need a horizon: t_max, stop or max_events")
    if not (subset in ("free", "pinned") or
            (isinstance(subset, tuple) and len(subset) == 2)):
        raise ValueError(f"unknown subset {subset!r}")
    sim = Simulation(eta0, lam, rng, restriction=subset)
    log, _ = _drive(sim, t_max=t_max, stop=stop, observe_at=observe_at,
                    snapshots=snapshots, keep_events=keep_events,
                    max_events=max_events)
    log.initial = tuple(eta0)
    return log


@dataclass
class HittingResult:
    time: float
    hit: bool
    n_events: int


def hitting_time(eta0: Path, lam: float, target, rng, t_cap: float,
                 restriction=None) -> HittingResult:
    """First time the chain enters the target set, or a timeout marker.

    ``target`` is "pinned", "free" or a predicate on the height list.  A
    start already inside the target returns time 0.  Timing out at
    ``t_cap`` is a value (hit=False), not an error.
    """
    sim = Simulation(eta0, lam, rng, restriction=restriction)
    if _as_predicate(target, sim)():
        return HittingResult(0.0, True, 0)
    log, stopped = _drive(sim, t_max=t_cap, stop=target, keep_events=False)
    return HittingResult(sim.t if stopped else t_cap, stopped, sim.events)


def coupled_pinned_hitting(eta_low: Path, eta_high: Path, lam: float, rng,
                           t_cap: float):
    """Wall-hitting times of two ordered chains under the monotone coupling.

    Both chains are driven by the same per-site rate-one clocks and the
    same uniforms through the heat-bath update, which preserves the
    pointwise order for lam >= 1; the higher chain can therefore never
    touch the wall first.  Returns (time_low, time_high), capped.
    """
    if lam < 1.0:
        raise ValueError("the monotone coupling needs lam >= 1")
    if len(eta_low) != len(eta_high):
        raise ValueError("paths must have equal length")
    if any(a > b for a, b in zip(eta_low, eta_high)):
        raise ValueError("eta_low must lie below eta_high")
    n = len(eta_low) - 1
    low, high = list(eta_low), list(eta_high)
    t = 0.0
    t_low = t_high = None
    p_up_contact = 1.0 / (1.0 + lam)
    blocks = _RandomBlocks(rng)
    total_clock = float(n - 1)
    while t < t_cap and (t_low is None or t_high is None):
        t += blocks.exponential() / total_clock
        x = 1 + int(blocks.uniform() * (n - 1))
        u = blocks.uniform()
        for h, name in ((low, "low"), (high, "high")):
            v = h[x - 1]
            if v != h[x + 1] or v == 0:
                continue
            p_up = p_up_contact if v == 1 else 0.5
            h[x] = v + 1 if u < p_up else v - 1
        if t_low is None and min(low) == 0:
            t_low = t
        if t_high is None and min(high) == 0:
            t_high = t
    return (t_low if t_low is not None else t_cap,
            t_high if t_high is not None else t_cap)
