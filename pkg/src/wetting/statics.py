"""Exact equilibrium statics for the wetting ensembles.

Two layers live here.  The closed-form layer evaluates the thermodynamic
functions of the model: the pinned free energy, the bridge entropy, the
optimal descent slope, the elevated-boundary free energy (both in closed
form and by direct maximisation of the variational objective), and the
critical curve in the (a, lambda) plane.  The finite-N layer computes
log-domain partition functions by dynamic programming over (site,
height), counts wall-avoiding walks exactly with big-integer ballot
numbers, decomposes the pinned ensemble over contact windows, and draws
exact Gibbs samples by sequential height sampling against backward
weight tables.

All partition arithmetic is done in log domain with logaddexp; exact
integer arithmetic is used only in the ballot counts (and in the
enumeration oracles that the tests run against).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats
from scipy.special import xlogy

from .core import ModelParams, Path, bracket

NEG_INF = -np.inf

#: log-subtraction guard for the pinned partition function: below this
#: head-room (in nats) between log Z and log Zfree the subtraction loses
#: too many digits and the absorbing-flag DP is used instead.
LOG_SUBTRACT_GUARD = 1e-6


# ---------------------------------------------------------------------------
# closed-form thermodynamics
# ---------------------------------------------------------------------------

def free_energy(lam: float) -> float:
    """Pinned free energy of the zero-boundary model.

    Vanishes for lam <= 2 and equals log(lam / (2 sqrt(lam - 1))) above;
    continuous at lam = 2.
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if lam <= 2.0:
        return 0.0
    return math.log(lam / (2.0 * math.sqrt(lam - 1.0)))


def entropy_q(d) -> float:
    """Entropy cost per unit length of a +-1 path with drift d in [0, 1].

    q(d) = [(1+d)log(1+d) + (1-d)log(1-d)] / 2, with 0 log 0 = 0.
    Non-negative, convex, q(0) = 0, q(1) = log 2.
    """
    if d < 0.0 or d > 1.0:
        raise ValueError(f"drift must lie in [0, 1], got {d}")
    return 0.5 * float(xlogy(1.0 + d, 1.0 + d) + xlogy(1.0 - d, 1.0 - d))


def _entropy_q_vec(d):
    return 0.5 * (xlogy(1.0 + d, 1.0 + d) + xlogy(1.0 - d, 1.0 - d))


def d_lambda(lam: float) -> float:
    """Optimal descent slope 1 - 2/lam of the pinned strands (lam > 2).

    The equivalent form sqrt(1 - exp(-2 F(lam))) is evaluated as well and
    the two must agree to 1e-12.
    """
    if lam <= 2.0:
        raise ValueError(f"the pinned slope needs lam > 2, got {lam}")
    d = 1.0 - 2.0 / lam
    d_alt = math.sqrt(1.0 - math.exp(-2.0 * free_energy(lam)))
    if abs(d - d_alt) > 1e-12:
        raise AssertionError(f"slope forms disagree: {d} vs {d_alt}")
    return d


def fast_phase_edge(a: float) -> float:
    """Boundary 2/(1-2a) between the fast free phase and the double wells."""
    return 2.0 / (1.0 - 2.0 * a)


def lambda_c(a: float, tol: float = 1e-10, hi: float = 64.0,
             hi_cap: float = 2.0 ** 60) -> float:
    """Critical pinning strength: unique root of F(lam) = a log(lam - 1).

    Found by bisection on (2, hi], doubling hi up to ``hi_cap`` until the
    residual changes sign.
    """
    if not 0.0 < a < 0.5:
        raise ValueError(f"a must lie in (0, 1/2), got {a}")

    def residual(lam):
        return free_energy(lam) - a * math.log(lam - 1.0)

    lo = 2.0 + 1e-12
    while residual(hi) <= 0.0:
        hi *= 2.0
        if hi > hi_cap:
            raise RuntimeError(f"no sign change for lambda_c below {hi_cap}")
    while hi - lo > tol * (1.0 + lo):
        mid = 0.5 * (lo + hi)
        if residual(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _variational_maximum(lam, a, gridsize=2048):
    """Maximise F(lam)(1 - 2a/d) - (2a/d) q(d) over d in [2a, 1].

    Coarse grid plus golden-section refinement around the best grid cell;
    the objective is smooth and unimodal past the lower boundary.
    """
    f = free_energy(lam)
    two_a = 2.0 * a

    def obj(d):
        return f * (1.0 - two_a / d) - (two_a / d) * _entropy_q_vec(d)

    ds = np.linspace(two_a, 1.0, gridsize)
    vals = obj(ds)
    i = int(np.argmax(vals))
    lo = ds[max(i - 1, 0)]
    hi = ds[min(i + 1, gridsize - 1)]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = obj(x1), obj(x2)
    for _ in range(80):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = obj(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = obj(x1)
    d_star = 0.5 * (lo + hi)
    return float(d_star), float(obj(d_star)), float(ds[1] - ds[0])


@dataclass(frozen=True)
class PhasePoint:
    """Elevated free energy at one (a, lambda) with its regime label."""

    a: float
    lam: float
    free_energy: float
    d_star: float
    regime: str


def classify_regime(a, lam, lam_crit=None, rtol=1e-9) -> str:
    if lam <= fast_phase_edge(a):
        return "free-fast"
    lc = lambda_c(a) if lam_crit is None else lam_crit
    if abs(lam - lc) <= rtol * max(1.0, lc):
        return "critical-curve"
    return "free-double-well" if lam < lc else "pinned-double-well"


def free_energy_elevated(lam: float, a: float, gridsize: int = 2048) -> PhasePoint:
    """Free energy of the elevated-boundary ensemble.

    Evaluated both in closed form, (F(lam) - a log(lam - 1))_+, and by
    direct maximisation of the variational objective over the descent
    slope; the two routes must agree to 1e-8.
    """
    if not 0.0 < a < 0.5:
        raise ValueError(f"a must lie in (0, 1/2), got {a}")
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    if lam > 2.0:
        closed = max(0.0, free_energy(lam) - a * math.log(lam - 1.0))
    else:
        closed = 0.0
    d_star, val, step = _variational_maximum(lam, a, gridsize)
    numeric = max(0.0, val)
    if abs(closed - numeric) > 1e-8:
        raise AssertionError(
            f"variational routes disagree at (a={a}, lam={lam}): "
            f"closed={closed!r}, grid={numeric!r}"
        )
    return PhasePoint(a=a, lam=lam, free_energy=closed, d_star=d_star,
                      regime=classify_regime(a, lam))


def scaling_profile(a: float, lam: float, x):
    """Limit shape of the rescaled path at position x in [0, 1].

    Above the fast-phase edge (descent slope exceeding 2a) this is the
    tent max(a - d x, 0, a + d(x-1)) touching the wall on a macroscopic
    stretch; otherwise the profile is flat at a.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise ValueError("profile positions must lie in [0, 1]")
    if lam > fast_phase_edge(a):
        d = d_lambda(lam)
        prof = np.maximum(np.maximum(a - d * xs, 0.0), a + d * (xs - 1.0))
    else:
        prof = np.full_like(xs, a)
    return prof if prof.ndim else float(prof)


# ---------------------------------------------------------------------------
# log-domain dynamic programming over (site, height)
# ---------------------------------------------------------------------------

def _contact_logweights(hmax, lam, wall):
    # per-site weight lambda**1{h == 0}; one padding column above hmax
    w = np.zeros(hmax + 2)
    if wall == 0:
        w[0] = math.log(lam)
    return w


def _backward_plain(n, lam, start, end, wall):
    """b[x, h] = log sum over tails from (x, h) to (n, end) of the contact
    weights accumulated on [x, n] (h >= wall throughout)."""
    hmax = (n + start + end) // 2
    w = _contact_logweights(hmax, lam, wall)
    b = np.full((n + 1, hmax + 2), NEG_INF)
    if end >= wall:
        b[n, end] = w[end]
    for x in range(n - 1, -1, -1):
        nxt = b[x + 1]
        cur = b[x]
        cur[1:-1] = nxt[:-2]
        np.logaddexp(cur[:-1], nxt[1:], out=cur[:-1])
        cur[-1] = NEG_INF
        cur += w
        if wall > 0:
            cur[:wall] = NEG_INF
    return b


def _backward_pinned(n, lam, start, end):
    """Absorbing-flag tables for the at-least-one-contact restriction.

    Returns (any, touch): ``any`` is the unconstrained table, ``touch``
    requires a wall contact somewhere on [x, n].  On the wall the two
    coincide, which is what makes the flag absorbing.
    """
    any_tab = _backward_plain(n, lam, start, end, wall=0)
    touch = np.full_like(any_tab, NEG_INF)
    touch[:, 0] = any_tab[:, 0]
    for x in range(n - 1, -1, -1):
        nxt = touch[x + 1]
        cur = touch[x]
        cur[1:-1] = nxt[:-2]
        np.logaddexp(cur[1:-1], nxt[2:], out=cur[1:-1])
        cur[0] = any_tab[x, 0]
        cur[-1] = NEG_INF
    return any_tab, touch


def _forward_plain(n, lam, start, end, wall):
    hmax = (n + start + end) // 2
    w = _contact_logweights(hmax, lam, wall)
    f = np.full((n + 1, hmax + 2), NEG_INF)
    if start >= wall:
        f[0, start] = w[start]
    for x in range(1, n + 1):
        prv = f[x - 1]
        cur = f[x]
        cur[1:-1] = prv[:-2]
        np.logaddexp(cur[:-1], prv[1:], out=cur[:-1])
        cur[-1] = NEG_INF
        cur += w
        if wall > 0:
            cur[:wall] = NEG_INF
    return f


_ENSEMBLES = ("zero", "elevated", "elevated-free", "elevated-pinned")


def _ensemble_signature(params: ModelParams, ensemble: str):
    if ensemble == "zero":
        return 0, 0, None
    if ensemble == "elevated":
        return params.boundary, 0, None
    if ensemble == "elevated-free":
        return params.boundary, 1, "free"
    if ensemble == "elevated-pinned":
        return params.boundary, 0, "pinned"
    raise ValueError(f"unknown ensemble {ensemble!r}; expected one of {_ENSEMBLES}")


@dataclass
class WeightTable:
    """Backward (or forward) log-weight table for one ensemble.

    ``log_w[x, h]`` is minus infinity exactly where no admissible path
    segment exists (wrong parity, below the wall, or unable to fulfil the
    pinned restriction).  For the pinned restriction ``log_w`` is the
    must-touch layer and ``log_w_any`` the unconstrained one; otherwise
    ``log_w_any`` is None.
    """

    n: int
    lam: float
    start: int
    end: int
    wall: int
    restriction: Optional[str]
    direction: str
    log_w: np.ndarray
    log_w_any: Optional[np.ndarray] = None

    @classmethod
    def build(cls, n, lam, start, end, restriction=None, direction="backward"):
        if direction not in ("backward", "forward"):
            raise ValueError(f"unknown direction {direction!r}")
        wall = 1 if restriction == "free" else 0
        if restriction == "pinned":
            if direction == "forward":
                raise ValueError("forward pinned tables are not supported")
            any_tab, touch = _backward_pinned(n, lam, start, end)
            return cls(n, lam, start, end, wall, restriction, direction,
                       log_w=touch, log_w_any=any_tab)
        builder = _backward_plain if direction == "backward" else _forward_plain
        tab = builder(n, lam, start, end, wall)
        return cls(n, lam, start, end, wall, restriction, direction, log_w=tab)

    def total_log_partition(self) -> float:
        """Log partition function of the ensemble the table was built for."""
        if self.direction == "backward":
            total = self.log_w[0, self.start]
        else:
            total = self.log_w[self.n, self.end]
        if not np.isfinite(total):
            raise ValueError("empty ensemble: no admissible path")
        return float(total)


# ---------------------------------------------------------------------------
# partition functions
# ---------------------------------------------------------------------------

def log_partition_bridge(lam: float, n: int) -> float:
    """log of the zero-boundary partition function of length n (n >= 0 even).

    Contact weight lambda applies at every site with height zero,
    endpoints included, so the degenerate n = 0 system has value lambda.
    """
    if n < 0 or n % 2 != 0:
        raise ValueError(f"length must be a non-negative even integer, got {n}")
    if n == 0:
        return math.log(lam)
    return float(_backward_plain(n, lam, 0, 0, wall=0)[0, 0])


def partition_zero(lam: float, n: int) -> float:
    """log Z of the zero-boundary ensemble of length n (n >= 2 even)."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return log_partition_bridge(lam, n)


def log_zero_partition_profile(lam: float, n: int) -> np.ndarray:
    """Array z with z[k] = log Z of the zero-boundary system of length k.

    One forward pass gives every even k in 0..n at once (odd entries are
    minus infinity).  Used by the contact-window decomposition.
    """
    f = _forward_plain(n, lam, 0, 0, wall=0)
    return f[:, 0].copy()


class ElevatedPartitions(NamedTuple):
    log_z: float
    log_z_free: float
    log_z_pinned: float
    pinned_method: str


def partition_elevated(lam: float, a: float, n: int) -> ElevatedPartitions:
    """Full / never-touching / at-least-one-contact log partition functions.

    The pinned part is obtained by log-domain subtraction of the free
    part from the total; when the head-room is below the cancellation
    guard the absorbing-flag DP computes it directly instead.
    """
    params = ModelParams(n=n, a=a, lam=lam)
    c = params.boundary
    log_z = float(_backward_plain(n, lam, c, c, wall=0)[0, c])
    log_z_free = float(_backward_plain(n, lam, c, c, wall=1)[0, c])
    head_room = log_z - log_z_free
    if head_room > LOG_SUBTRACT_GUARD:
        log_z_pinned = log_z + math.log1p(-math.exp(-head_room))
        method = "log-subtraction"
    else:
        _, touch = _backward_pinned(n, lam, c, c)
        log_z_pinned = float(touch[0, c])
        method = "touch-flag-dp"
    return ElevatedPartitions(log_z, log_z_free, log_z_pinned, method)


# ---------------------------------------------------------------------------
# ballot counts and contact windows
# ---------------------------------------------------------------------------

class BallotCount(NamedTuple):
    count: int
    log: float


def ballot_count(l: int, b: int, strict: bool = True) -> BallotCount:
    """Number of +-1 walks of length l from 0 to b staying positive.

    With ``strict`` the walk satisfies S_m > 0 for all m in [1, l] and the
    cycle-lemma closed form (b/l) C(l, (l+b)/2) is returned as an exact
    integer.  With ``strict=False`` the constraint is S_m >= 0 and the
    reflection count C(l, k) - C(l, k+1) is used instead.
    """
    if strict and not l >= b >= 1:
        raise ValueError(f"need l >= b >= 1, got l={l}, b={b}")
    if not strict and not (l >= b >= 0):
        raise ValueError(f"need l >= b >= 0, got l={l}, b={b}")
    if (l - b) % 2 != 0:
        raise ValueError(f"parity violation: l={l}, b={b}")
    k = (l + b) // 2
    if strict:
        num = b * math.comb(l, k)
        count, rem = divmod(num, l)
        if rem:
            raise AssertionError(f"cycle-lemma count not integral at ({l}, {b})")
    else:
        count = math.comb(l, k) - math.comb(l, k + 1)
    return BallotCount(count, math.log(count) if count else NEG_INF)


def conditioned_positivity_probability(l: int, b: int) -> Fraction:
    """P[S stays positive on (0, l] | S_l = b] for the symmetric walk.

    Exact rational value Q(l, b) / C(l, (l+b)/2); the ballot identity
    makes this equal to b/l exactly at every finite size, which is
    asserted here.
    """
    q = ballot_count(l, b, strict=True).count
    prob = Fraction(q, math.comb(l, (l + b) // 2))
    if prob != Fraction(b, l):
        raise AssertionError(f"ballot identity failed at ({l}, {b})")
    return prob


@dataclass(frozen=True)
class ContactWindow:
    """Leftmost/rightmost wall-contact pair (l, r), both even and ordered."""

    l: int
    r: int

    def __post_init__(self):
        if self.l % 2 or self.r % 2:
            raise ValueError(f"window ({self.l}, {self.r}) must be even")
        if self.l > self.r:
            raise ValueError(f"window ({self.l}, {self.r}) is not ordered")

    def validate(self, params: ModelParams):
        c = params.boundary
        if not (c <= self.l and self.r <= params.n - c):
            raise ValueError(
                f"window ({self.l}, {self.r}) outside the admissible range "
                f"[{c}, {params.n - c}] for n={params.n}"
            )


def contact_windows(params: ModelParams):
    """All admissible (l, r) windows, ordered lexicographically."""
    c = params.boundary
    return [ContactWindow(l, r)
            for l in range(c, params.n - c + 1, 2)
            for r in range(l, params.n - c + 1, 2)]


def partition_window(lam: float, a: float, n: int, window: ContactWindow) -> float:
    """log of the pinned partition function restricted to (L, R) = (l, r).

    Product structure: the middle carries the full zero-boundary weight
    (both endpoint contacts included), the two outer factors are pure
    wall-avoiding walk counts.
    """
    params = ModelParams(n=n, a=a, lam=lam)
    window.validate(params)
    c = params.boundary
    mid = log_partition_bridge(lam, window.r - window.l)
    return mid + ballot_count(window.l, c).log + ballot_count(n - window.r, c).log


def window_log_table(params: ModelParams):
    """Matrix of log window partition functions over the whole domain.

    Returns (positions, table) where positions lists the admissible even
    contact sites and table[i, j] = log Z restricted to (l, r) =
    (positions[i], positions[j]) (minus infinity below the diagonal).
    """
    n, c, lam = params.n, params.boundary, params.lam
    pos = np.arange(c, n - c + 1, 2)
    zero_profile = log_zero_partition_profile(lam, n - 2 * c)
    log_q = np.array([ballot_count(int(l), c).log for l in pos])
    table = np.full((len(pos), len(pos)), NEG_INF)
    for i, l in enumerate(pos):
        lengths = pos[i:] - l
        table[i, i:] = zero_profile[lengths] + log_q[i] + log_q[::-1][i:]
    return pos, table


def log_pinned_from_windows(params: ModelParams) -> float:
    """log of the pinned partition function as a sum over windows."""
    _, table = window_log_table(params)
    finite = table[np.isfinite(table)]
    m = finite.max()
    return float(m + math.log(np.exp(finite - m).sum()))


def log_one_contact_sum(params: ModelParams) -> float:
    """log of the summed weight of single-contact paths (the l = r diagonal)."""
    pos, table = window_log_table(params)
    diag = np.diagonal(table)
    m = diag.max()
    return float(m + math.log(np.exp(diag - m).sum()))


def log_profile_weight(lam: float, a: float, n: int, window: ContactWindow) -> float:
    """log of the closed-form surrogate for a window partition function.

    Combines the 2^N entropy, the square-root corrections at both window
    edges, the pinned free energy over the middle stretch and the
    entropy cost of the two descending strands.  The ratio against the
    exact window value stays bounded uniformly in N at fixed (a, lambda).
    """
    params = ModelParams(n=n, a=a, lam=lam)
    window.validate(params)
    c = params.boundary
    l, r = window.l, window.r
    val = n * math.log(2.0)
    val -= 0.5 * math.log(l - c + 1.0)
    val -= 0.5 * math.log(n - r - c + 1.0)
    val += free_energy(lam) * (r - l)
    val -= l * entropy_q(c / l)
    val -= (n - r) * entropy_q(c / (n - r))
    return val


def profile_weight_peak(params: ModelParams) -> float:
    """Real-valued l maximising the surrogate exponent (= n - r at the peak).

    Equals boundary * lam/(lam - 2), i.e. boundary divided by the optimal
    descent slope; requires lam > 2.
    """
    if params.lam <= 2.0:
        raise ValueError("the surrogate exponent peaks only for lam > 2")
    return params.boundary * params.lam / (params.lam - 2.0)


# ---------------------------------------------------------------------------
# exact Gibbs sampling
# ---------------------------------------------------------------------------

class PathSampler:
    """Exact sequential sampler for one ensemble at fixed parameters.

    Heights are sampled left to right; the transition law at each site is
    proportional to the contact weight times the backward suffix weight,
    so the output is distributed exactly as the Gibbs measure (or its
    free/pinned restriction).
    """

    def __init__(self, params: ModelParams, ensemble: str):
        self.params = params
        self.ensemble = ensemble
        start, wall, restriction = _ensemble_signature(params, ensemble)
        self.start = start
        self.table = WeightTable.build(params.n, params.lam, start, start,
                                       restriction=restriction)

    @property
    def log_partition(self) -> float:
        return self.table.total_log_partition()

    def sample_heights(self, k: int, rng) -> np.ndarray:
        """Draw k independent paths; returns an int (k, n+1) height matrix."""
        n = self.params.n
        tab = self.table.log_w
        pinned = self.table.restriction == "pinned"
        any_tab = self.table.log_w_any if pinned else None
        h = np.full(k, self.start, dtype=np.int64)
        out = np.empty((k, n + 1), dtype=np.int64)
        out[:, 0] = h
        touched = h == 0
        uu = rng.random((n, k))
        with np.errstate(invalid="ignore"):
            for x in range(n):
                row = any_tab[x + 1] if pinned else tab[x + 1]
                lw_up = row[h + 1]
                lw_dn = np.where(h > 0, row[np.maximum(h - 1, 0)], NEG_INF)
                if pinned:
                    row_m = tab[x + 1]
                    lw_up = np.where(touched, lw_up, row_m[h + 1])
                    lw_dn = np.where(touched, lw_dn,
                                     np.where(h > 0, row_m[np.maximum(h - 1, 0)],
                                              NEG_INF))
                m = np.maximum(lw_up, lw_dn)
                p_up = np.exp(lw_up - m)
                p_up = p_up / (p_up + np.exp(lw_dn - m))
                up = uu[x] < p_up
                h = np.where(up, h + 1, h - 1)
                if pinned:
                    touched |= h == 0
                out[:, x + 1] = h
        return out

    def sample(self, rng) -> Path:
        return tuple(int(v) for v in self.sample_heights(1, rng)[0])

    def expected_contacts(self) -> float:
        """Exact E[number of wall contacts] under the ensemble measure."""
        p = self.contact_probabilities()
        return float(p.sum())

    def contact_probabilities(self) -> np.ndarray:
        """P[eta_x = 0] for every site x, computed from forward+backward tables."""
        n, lam, start = self.params.n, self.params.lam, self.start
        if self.table.restriction == "free":
            return np.zeros(n + 1)
        fwd = _forward_plain(n, lam, start, start, wall=0)
        bwd = (self.table.log_w_any if self.table.restriction == "pinned"
               else self.table.log_w)
        log_z = self.log_partition
        # both tables carry the contact weight at x, so divide one out
        log_p = fwd[:, 0] + bwd[:, 0] - math.log(lam) - log_z
        return np.exp(log_p)


def gibbs_sample(params: ModelParams, ensemble: str, rng) -> Path:
    """Draw a single exact sample from the requested ensemble."""
    return PathSampler(params, ensemble).sample(rng)


# ---------------------------------------------------------------------------
# contact-window statistics of the pinned ensemble
# ---------------------------------------------------------------------------

def contact_window_bounds(heights: np.ndarray):
    """Per-row leftmost and rightmost zero of a height matrix."""
    zero = heights == 0
    if not zero.any(axis=1).all():
        raise ValueError("every path must have at least one contact")
    left = np.argmax(zero, axis=1)
    right = heights.shape[1] - 1 - np.argmax(zero[:, ::-1], axis=1)
    return left, right


@dataclass
class ContactWindowStats:
    params: ModelParams
    n_samples: int
    l_center: float
    halfwidth: float
    l_samples: np.ndarray
    r_samples: np.ndarray
    frac_l_in_window: float
    ks_pvalue_reflection: float


def contact_window_stats(params: ModelParams, n_samples: int, rng,
                         alpha: float = 0.75) -> ContactWindowStats:
    """Concentration of the leftmost contact under the pinned ensemble.

    Samples (L, R) from the pinned-conditioned Gibbs measure, records the
    fraction of leftmost contacts within N^alpha of the predicted centre
    N a lam/(lam - 2), and tests the reflection symmetry L ~ N - R with a
    two-sample KS statistic.
    """
    a, lam, n = params.a, params.lam, params.n
    if lam < lambda_c(a):
        raise ValueError("contact-window statistics need the pinned regime")
    sampler = PathSampler(params, "elevated-pinned")
    heights = sampler.sample_heights(n_samples, rng)
    left, right = contact_window_bounds(heights)
    center = n * a * lam / (lam - 2.0)
    halfwidth = n ** alpha
    frac = float(np.mean(np.abs(left - center) < halfwidth))
    ks = stats.ks_2samp(left, n - right, method="asymp")
    return ContactWindowStats(params, n_samples, center, halfwidth,
                              left, right, frac, float(ks.pvalue))
