"""Space-time block events, their closed forms, and oriented site percolation.

The renormalization argument chops space-time into blocks and asks for
"good" behavior inside each:

* every site of a small box sees at least one death mark in a window
  (probability ``prob_a1``),
* consecutive marks affecting a larger box never arrive within ``2*delta``
  of each other (lower bound ``bound_a2``, sampler ``estimate_a2``),
* a lower bound for the chance that each sub-interval delivers the birth
  arrows a spreading cooperator cluster needs (``prob_a3_bound``),
* no cooperator-only difference arrow points into a space-time region
  (``c_plus_absence_prob``).

Good blocks dominate supercritical oriented site percolation on the
parity lattice {(z, n): sum(z) + n even}, which this module samples with
independent open/closed marks (``percolate``) and searches for directed
dry paths (``dry_path_exists``) in the step graph or its horizontal
augmentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from coopsim import lattice
from coopsim.errors import DomainError, FlavorMismatch, OutOfBounds
from coopsim.lattice import DEFECTOR, EMPTY, Torus
from coopsim.params import Params, equal_rate_benefit

# Pilot-validated critical birth rate of the d=1 single-type process
# (per-neighbor rate beta/2d crosses criticality near 1.6489).
BETA_STAR_D1 = 3.2978


def inner_box_sites(d: int) -> int:
    """Sites in the union of the 2d face-adjacent side-3 sub-boxes."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return 2 * d * 3 ** (d - 1)


def outer_box_sites(d: int) -> int:
    """Inner box plus the three central columns: 3^(d-1) * (2d + 3) sites."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return 3 ** (d - 1) * (2 * d + 3)


@dataclass(frozen=True, slots=True)
class BlockSpec:
    """Scales of one space-time block.

    ``T`` is the block's time span, ``delta`` the sub-interval length,
    ``epsilon`` the closure probability handed to the percolation
    comparison, and ``L`` the spatial half-width of the large boxes
    (side 2L+1) whose sub-boxes have side max(1, round(L**0.1)).
    """

    T: float
    delta: float
    epsilon: float
    L: int

    def __post_init__(self) -> None:
        if not (self.T > 0 and self.delta > 0 and self.L > 0):
            raise DomainError("T, delta and L must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise DomainError(f"epsilon must be a probability, got {self.epsilon}")

    @classmethod
    def for_scale(cls, L: int, delta: float = 1.0, epsilon: float = 0.05) -> "BlockSpec":
        """Large-box convention: the time span is the squared spatial scale."""
        return cls(T=float(L) ** 2, delta=delta, epsilon=epsilon, L=L)

    @property
    def sub_box_side(self) -> int:
        return max(1, round(self.L**0.1))


# ----------------------------------------------------------- closed forms


def prob_a1(T: float, d: int) -> float:
    """Chance every inner-box site dies at least once within a T-window."""
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    return (1.0 - math.exp(-T)) ** inner_box_sites(d)


def estimate_a1(T: float, d: int, replicas: int, rng: np.random.Generator) -> tuple[float, float]:
    """Sample unit-rate death marks per inner-box site over [T, 2T]."""
    if replicas < 1:
        raise DomainError(f"need at least one replica, got {replicas}")
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    counts = rng.poisson(T, size=(replicas, inner_box_sites(d)))
    hits = (counts > 0).all(axis=1)
    freq = float(hits.mean())
    return freq, math.sqrt(freq * (1.0 - freq) / replicas)


def _mark_rate(p: Params, d: int) -> float:
    """Total rate of crosses plus incoming birth arrows over the outer box."""
    return outer_box_sites(d) * (p.beta + p.beta_d + 1.0)


def bound_a2(
    T: float, delta: float, d: int, p: Params, a_choice: float | None = None
) -> float:
    """Lower bound for the well-spaced-marks event.

    The rate constant folds the box size and the per-site mark intensity;
    the default exponential constant comes from the Poisson upper-tail
    bound P(N >= 2*lambda) <= exp(-lambda*(2 ln 2 - 1)) applied to the
    mark count over [0, 2T].  The bound can be negative (and thus vacuous)
    when ``delta`` is not small against 1/(4rT).
    """
    if T <= 0 or delta <= 0:
        raise DomainError("T and delta must be positive")
    r = _mark_rate(p, d)
    a = 2.0 * r * (2.0 * math.log(2.0) - 1.0) if a_choice is None else a_choice
    if a <= 0:
        raise DomainError(f"exponential constant must be positive, got {a}")
    return 1.0 - math.exp(-a * T) - 4.0 * r * T * (1.0 - math.exp(-2.0 * delta * r))


def estimate_a2(
    p: Params,
    T: float,
    delta: float,
    d: int,
    replicas: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Frequency of no two marks within 2*delta over [0, 2T] on the outer box."""
    if replicas < 1:
        raise DomainError(f"need at least one replica, got {replicas}")
    if T <= 0 or delta <= 0:
        raise DomainError("T and delta must be positive")
    rate = _mark_rate(p, d)
    window = 2.0 * T
    ok = 0
    for _ in range(replicas):
        n = rng.poisson(rate * window)
        if n < 2:
            ok += 1
            continue
        times = np.sort(rng.uniform(0.0, window, size=n))
        if float(np.diff(times).min()) > 2.0 * delta:
            ok += 1
    freq = ok / replicas
    return freq, math.sqrt(freq * (1.0 - freq) / replicas)


def prob_a3_bound(beta: float, beta_c: float, T: float, delta: float, d: int) -> float:
    """Closed-form lower bound for delivering a birth arrow per sub-interval.

    Each of the 2 * outer_box_sites(d) * T / delta sub-intervals must carry
    an arrow that arrives at per-site rate (beta + beta_c/2d) / 2d.
    """
    if beta <= 0 or beta_c < 0 or T <= 0 or delta <= 0:
        raise DomainError("rates and scales must be positive")
    per_site = (beta + beta_c / (2 * d)) / (2 * d)
    exponent = 2.0 * outer_box_sites(d) * T / delta
    return (1.0 - math.exp(-delta * per_site)) ** exponent


def c_plus_absence_prob(L: int, d: int, rho: float) -> float:
    """Chance no cooperator-difference arrow points into a block region.

    The region spans (6L+1)^d sites over a time window of length 2L^2, and
    the difference stream delivers arrows into any fixed site at rate rho.
    """
    if L < 1 or int(L) != L:
        raise DomainError(f"L must be a positive integer, got {L}")
    if rho < 0:
        raise DomainError(f"rho must be nonnegative, got {rho}")
    return math.exp(-2.0 * L**2 * (6 * L + 1) ** d * rho)


def estimate_c_plus_absence(
    L: int, d: int, rho: float, replicas: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo companion to :func:`c_plus_absence_prob`.

    Draws the difference-arrow channels targeting the region site by site
    (4d^2 channels per site at rate rho/4d^2 each, superposed) over the
    2L^2 window and reports the frequency of drawing none at all.
    """
    if replicas < 1:
        raise DomainError(f"need at least one replica, got {replicas}")
    c_plus_absence_prob(L, d, rho)  # argument validation
    per_site = (rho / (4 * d * d)) * (4 * d * d)
    lam = per_site * (6 * L + 1) ** d * 2.0 * L**2
    counts = rng.poisson(lam, size=replicas)
    freq = float((counts == 0).mean())
    return freq, math.sqrt(freq * (1.0 - freq) / replicas)


# ------------------------------------------------------------- percolation


class OrientedLattice:
    """Parity-constrained site lattice with upward (and horizontal) steps."""

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise DomainError(f"dimension must be >= 1, got {dim}")
        self.dim = dim

    def parity_valid(self, z, n: int) -> bool:
        coords = (z,) if self.dim == 1 and isinstance(z, int) else tuple(z)
        return (sum(coords) + n) % 2 == 0

    def step_children(self, z, n: int):
        """Sites fed by the upward edges (one unit sideways, one level up)."""
        coords = (z,) if self.dim == 1 and isinstance(z, int) else tuple(z)
        out = []
        for j in range(self.dim):
            for sign in (-1, 1):
                moved = list(coords)
                moved[j] += sign
                out.append((moved[0] if self.dim == 1 else tuple(moved), n + 1))
        return out

    def horizontal_children(self, z, n: int):
        """Same-level double steps available in the augmented graph."""
        coords = (z,) if self.dim == 1 and isinstance(z, int) else tuple(z)
        out = []
        for j in range(self.dim):
            for sign in (-2, 2):
                moved = list(coords)
                moved[j] += sign
                out.append((moved[0] if self.dim == 1 else tuple(moved), n))
        return out


@dataclass(frozen=True, slots=True)
class PercolationField:
    """Sampled open/closed marks and the resulting wet sets (d=1).

    Arrays are indexed ``[level, z + width]``; cells off the parity
    sublattice are always False in both arrays.
    """

    epsilon: float
    levels: int
    width: int
    sources: tuple[int, ...]
    open_: np.ndarray
    wet: np.ndarray

    def z_index(self, z: int) -> int:
        return z + self.width

    def in_bounds(self, z: int, n: int) -> bool:
        return 0 <= n <= self.levels and abs(z) <= self.width

    def wet_levels(self) -> np.ndarray:
        return self.wet.sum(axis=1)

    def dump_rle(self) -> str:
        """One line per level: run-length encoded parity-cell states.

        ``w`` wet, ``o`` open but dry, ``x`` closed.
        """
        lines = []
        for n in range(self.levels + 1):
            symbols = []
            for z in range(-self.width, self.width + 1):
                if (z + n) % 2 != 0:
                    continue
                j = self.z_index(z)
                symbols.append("w" if self.wet[n, j] else "o" if self.open_[n, j] else "x")
            runs = []
            for s in symbols:
                if runs and runs[-1][1] == s:
                    runs[-1][0] += 1
                else:
                    runs.append([1, s])
            lines.append(f"{n}: " + "".join(f"{c}{s}" for c, s in runs))
        return "\n".join(lines) + "\n"


def percolate(
    epsilon: float,
    levels: int,
    width: int,
    sources="all",
    rng: np.random.Generator | None = None,
    uniforms: np.ndarray | None = None,
) -> PercolationField:
    """Sample an independent field and flood-fill wetness level by level.

    ``sources`` lists the level-0 launch sites (even coordinates), or
    ``"all"`` for every parity-valid level-0 site.  Passing the same
    ``uniforms`` array with two epsilons yields coupled fields: the wet
    set can only shrink as epsilon grows.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must be a probability, got {epsilon}")
    if levels < 0 or width < 1:
        raise DomainError("need levels >= 0 and width >= 1")
    span = 2 * width + 1
    if uniforms is None:
        if rng is None:
            raise DomainError("either rng or uniforms must be provided")
        uniforms = rng.random((levels + 1, span))
    elif uniforms.shape != (levels + 1, span):
        raise DomainError(
            f"uniforms shape {uniforms.shape} != {(levels + 1, span)}"
        )
    zs = np.arange(-width, width + 1)
    parity = (zs[None, :] + np.arange(levels + 1)[:, None]) % 2 == 0
    open_ = parity & (uniforms >= epsilon)

    if isinstance(sources, str):
        if sources != "all":
            raise DomainError(f"unknown source designation {sources!r}")
        source_list = [int(z) for z in zs[parity[0]]]
    else:
        source_list = sorted(int(z) for z in sources)
        for z in source_list:
            if abs(z) > width:
                raise OutOfBounds(f"source {z} beyond width {width}")
            if z % 2 != 0:
                raise DomainError(f"source {z} is not on the parity sublattice")

    wet = np.zeros_like(open_)
    for z in source_list:
        wet[0, z + width] = open_[0, z + width]
    for n in range(levels):
        feeder = np.zeros(span, dtype=bool)
        feeder[1:] |= wet[n, :-1]
        feeder[:-1] |= wet[n, 1:]
        wet[n + 1] = open_[n + 1] & feeder
    return PercolationField(
        epsilon=epsilon,
        levels=levels,
        width=width,
        sources=tuple(source_list),
        open_=open_,
        wet=wet,
    )


def _dry_reach_by_level(field: PercolationField, graph: str, n_max: int):
    """Yield, per level up to ``n_max``, the dry sites reachable from level 0."""
    span = 2 * field.width + 1
    zs = np.arange(-field.width, field.width + 1)
    dry = ~field.wet & (((zs[None, :] + np.arange(field.levels + 1)[:, None]) % 2) == 0)
    reach = dry[0].copy()
    for n in range(n_max + 1):
        if n > 0:
            feeder = np.zeros(span, dtype=bool)
            feeder[1:] |= reach[:-1]
            feeder[:-1] |= reach[1:]
            reach = dry[n] & feeder
        if graph == "H":
            # saturate same-level double steps
            while True:
                spread = reach.copy()
                spread[2:] |= reach[:-2]
                spread[:-2] |= reach[2:]
                spread &= dry[n]
                if (spread == reach).all():
                    break
                reach = spread
        yield reach


def dry_path_exists(field: PercolationField, target: tuple[int, int], graph: str = "G") -> bool:
    """Directed dry-site path search from level 0 to ``target``.

    ``graph`` "G" uses the upward steps only; "H" also walks the same-level
    double steps.  A site is dry when it is not wet (closed sites count).
    """
    if graph not in ("G", "H"):
        raise DomainError(f"graph must be 'G' or 'H', got {graph!r}")
    z_t, n_t = target
    if not field.in_bounds(z_t, n_t):
        raise OutOfBounds(f"target {target} outside the sampled field")
    if (z_t + n_t) % 2 != 0:
        raise DomainError(f"target {target} is not on the parity sublattice")
    for n, reach in enumerate(_dry_reach_by_level(field, graph, n_t)):
        if n == n_t:
            return bool(reach[z_t + field.width])
    raise AssertionError("unreachable")


def max_dry_level(field: PercolationField, graph: str = "G") -> int:
    """Highest level any dry path reaches, or -1 when level 0 is fully wet.

    Because a dry path to level n passes through every level below it, the
    indicator of "some dry path reaches level n" is nonincreasing in n
    field by field.
    """
    if graph not in ("G", "H"):
        raise DomainError(f"graph must be 'G' or 'H', got {graph!r}")
    top = -1
    for n, reach in enumerate(_dry_reach_by_level(field, graph, field.levels)):
        if reach.any():
            top = n
        else:
            break
    return top


# ----------------------------------------------------------- block spread


@dataclass(frozen=True, slots=True)
class BlockSpreadResult:
    frequency: float
    stderr: float
    replicas: int
    spec: BlockSpec


def _sub_box_slices(lo: int, hi: int, side: int) -> list[range]:
    """Partition [lo, hi] into runs of length ``side`` (last one may be short)."""
    return [range(a, min(a + side, hi + 1)) for a in range(lo, hi + 1, side)]


def block_spread_estimate(
    p: Params,
    spec: BlockSpec,
    replicas: int,
    rng: np.random.Generator,
) -> BlockSpreadResult:
    """Frequency that a minimally-seeded center block fills both neighbors.

    Starting from the minimal configuration of the center event — one
    defector placed uniformly in each sub-box of the center box, no
    cooperators anywhere — the equal-rate process runs for the block time
    span; success means both horizontally adjacent boxes end cooperator
    free (here automatic) with at least one defector in each of their
    sub-boxes.  d=1 only: the pilot-validated supercriticality threshold
    and the box bookkeeping are calibrated for one dimension.
    """
    if p.dim != 1:
        raise DomainError("block spread estimation is calibrated for d=1 only")
    if replicas < 1:
        raise DomainError(f"need at least one replica, got {replicas}")
    if p.beta_d <= 1e-9:
        raise DomainError(
            "degenerate block family: the type bonuses vanish with beta_d"
        )
    required = equal_rate_benefit(p.beta_d, p.dim)
    if abs(p.beta_c - required) > 1e-12:
        raise FlavorMismatch(
            f"block events use the equal-rate process: beta_c must be {required!r}"
        )
    if p.beta <= BETA_STAR_D1:
        raise DomainError(
            f"beta = {p.beta} is not above the pilot-validated threshold "
            f"{BETA_STAR_D1} for d=1"
        )
    L = spec.L
    side = 6 * L + 1  # covers [-3L, 3L]
    offset = 3 * L
    sub = spec.sub_box_side
    center_boxes = _sub_box_slices(-L, L, sub)
    left_boxes = _sub_box_slices(-2 * L, 0, sub)
    right_boxes = _sub_box_slices(0, 2 * L, sub)
    horizon = float(L) ** 2

    hits = 0
    for _ in range(replicas):
        torus = Torus(side, 1)
        for box in center_boxes:
            z = int(rng.integers(box.start, box.stop))
            torus.sites[z + offset] = DEFECTOR
        lattice.run(torus, p, horizon, rng, sample_interval=horizon)
        ok = True
        for boxes in (left_boxes, right_boxes):
            for box in boxes:
                if not any(torus.sites[z + offset] == DEFECTOR for z in box):
                    ok = False
                    break
            if not ok:
                break
        hits += ok
    freq = hits / replicas
    return BlockSpreadResult(
        frequency=freq,
        stderr=math.sqrt(freq * (1.0 - freq) / replicas),
        replicas=replicas,
        spec=spec,
    )
