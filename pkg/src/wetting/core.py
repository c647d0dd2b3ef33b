"""Model primitives shared by every other module.

A configuration is a nearest-neighbour height profile ("path") on
{0, ..., N} with increments of +-1, constrained to stay at or above the
hard wall at height 0.  Paths are stored as plain tuples of ints: they
are immutable, hashable (used as state labels by the spectral module)
and cheap at the sizes where explicit paths are ever materialised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

Path = tuple  # tuple of non-negative int heights, length N + 1

#: Largest N accepted by the brute-force enumeration oracle.
ENUMERATION_CAP = 24


def bracket(s) -> int:
    """Smallest even integer >= s (s must be non-negative)."""
    if s < 0:
        raise ValueError(f"bracket() needs a non-negative argument, got {s}")
    k = math.ceil(s)
    return k if k % 2 == 0 else k + 1


@dataclass(frozen=True)
class ModelParams:
    """Ensemble parameters: system length, relative boundary height, pinning strength.

    ``boundary`` is the common height of both endpoints in the elevated
    ensemble, the smallest even integer >= a*n.  It is computed once here
    and every other module reads it from this object, so no two modules
    can disagree on the rounding.
    """

    n: int
    a: float
    lam: float
    boundary: int = field(init=False)

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise ValueError(f"n must be an even integer >= 2, got {self.n}")
        if not 0.0 < self.a < 0.5:
            raise ValueError(f"a must lie in (0, 1/2), got {self.a}")
        if not self.lam > 0.0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        b = bracket(self.a * self.n)
        if b >= self.n:
            raise ValueError(
                f"boundary height {b} leaves no room on a system of length {self.n}"
            )
        object.__setattr__(self, "boundary", b)


class PhaseLabel(Enum):
    """Classification of a path: does it touch the wall anywhere?"""

    FREE = "free"
    PINNED = "pinned"


def phase_label(eta: Path) -> PhaseLabel:
    return PhaseLabel.PINNED if min(eta) == 0 else PhaseLabel.FREE


def validate_path(eta: Path, boundary=None):
    """Raise ValueError unless eta is a wall-respecting +-1 path.

    When ``boundary`` is given, both endpoints must sit at that height.
    """
    if len(eta) < 2:
        raise ValueError("a path needs at least two heights")
    for x, h in enumerate(eta):
        if h < 0:
            raise ValueError(f"negative height {h} at site {x}")
    for x in range(len(eta) - 1):
        if abs(eta[x + 1] - eta[x]) != 1:
            raise ValueError(f"increment at site {x} is not +-1")
    if boundary is not None and (eta[0] != boundary or eta[-1] != boundary):
        raise ValueError(f"endpoints {eta[0]}, {eta[-1]} differ from {boundary}")


def contacts(eta: Path) -> int:
    """Number of wall contacts: sites x in [0, N] with eta_x = 0."""
    return sum(1 for h in eta if h == 0)


def flip(eta: Path, x: int) -> Path:
    """Corner flip at site x: replace eta_x by eta_{x-1} + eta_{x+1} - eta_x.

    A local maximum becomes a local minimum and vice versa; at non-corner
    sites the move is the identity.  The involution flip(flip(eta, x), x)
    == eta holds whenever the move is admissible.  Flips that would push
    the height below the wall are rejected (these carry rate 0 in the
    dynamics).
    """
    if not 1 <= x <= len(eta) - 2:
        raise ValueError(f"site {x} is not flippable on a path of length {len(eta) - 1}")
    new_h = eta[x - 1] + eta[x + 1] - eta[x]
    if new_h < 0:
        raise ValueError(f"flip at site {x} would give height {new_h} < 0")
    return eta[:x] + (new_h,) + eta[x + 1 :]


def _walk(prefix, steps_left, end, wall):
    # depth-first generation; prune branches that cannot reach `end`.
    h = prefix[-1]
    if steps_left == 0:
        if h == end:
            yield tuple(prefix)
        return
    if abs(end - h) > steps_left:
        return
    for nh in (h + 1, h - 1):
        if nh >= wall:
            prefix.append(nh)
            yield from _walk(prefix, steps_left - 1, end, wall)
            prefix.pop()


def enumerate_bridges(n: int, start: int = 0, end=None, wall: int = 0,
                      cap: int = ENUMERATION_CAP):
    """Exhaustive list of +-1 bridges of length n from ``start`` to ``end``
    staying at or above ``wall`` (brute force; refused for n above cap)."""
    if n > cap:
        raise ValueError(f"enumeration of n={n} exceeds cap {cap}")
    end = start if end is None else end
    return list(_walk([start], n, end, wall))


def enumerate_paths(params: ModelParams, ensemble: str, cap: int = ENUMERATION_CAP):
    """Exhaustive list of paths in the requested ensemble (brute-force oracle).

    ensemble is one of "zero", "elevated", "elevated-free",
    "elevated-pinned".  Enumeration is refused for n above ``cap``.
    """
    if ensemble == "zero":
        start = 0
    elif ensemble in ("elevated", "elevated-free", "elevated-pinned"):
        start = params.boundary
    else:
        raise ValueError(f"unknown ensemble {ensemble!r}")
    paths = enumerate_bridges(params.n, start, cap=cap)
    if ensemble == "elevated-free":
        paths = [p for p in paths if min(p) > 0]
    elif ensemble == "elevated-pinned":
        paths = [p for p in paths if min(p) == 0]
    return paths
