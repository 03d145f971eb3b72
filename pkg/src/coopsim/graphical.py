"""Poisson-mark construction of the process, couplings, and dual tracing.

The process on a torus can be built from independent Poisson streams of
space-time marks instead of an event-by-event Gillespie draw:

* ``cross`` at a site kills its occupant (rate 1 per site),
* ``arrow`` from y to x copies y's occupant onto an empty x
  (rate beta/2d per directed neighbor pair),
* ``dot_arrow`` from y to x with a dot at z (a neighbor of y) births a
  cooperator onto an empty x when both y and z host cooperators
  (rate beta_c/4d^2 per triple),
* ``d_arrow`` from y to x births a defector onto an empty x when y hosts
  one (rate beta_d/2d per directed pair).

Three flavors of mark-sets are sampled:

``standard``
    the four streams above.
``equal_rate``
    requires beta_c = 2d*beta_d/(2d-1); drops the d-arrow stream and lets
    defectors give birth through the dot-arrows whose dot is not the
    target.  The leftover self-dotted arrows (dot == target) can never
    fire, since their dot sits on the birth site, which must be empty.
``coupled``
    one shared mark-set driving two processes whose parameters differ in
    the type bonuses; difference streams ``c_plus_dot_arrow`` /
    ``d_plus_arrow`` act on only one of the two processes, which keeps the
    first process cooperator-heavier and defector-lighter site by site.

The module also classifies "sterile" dot-arrows (whose dot site is
provably empty from the local mark pattern alone) and traces the
backward-in-time tree of potential ancestors of a space-time point.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from coopsim import lattice
from coopsim.errors import (
    CouplingOrder,
    DomainError,
    FlavorMismatch,
    InsufficientHistory,
)
from coopsim.lattice import COOPERATOR, DEFECTOR, EMPTY, Torus
from coopsim.params import Params, equal_rate_benefit

STANDARD = "standard"
EQUAL_RATE = "equal_rate"
COUPLED = "coupled"

CROSS = "cross"
ARROW = "arrow"
DOT_ARROW = "dot_arrow"
D_ARROW = "d_arrow"
C_PLUS_DOT_ARROW = "c_plus_dot_arrow"
D_PLUS_ARROW = "d_plus_arrow"

# Deterministic tie-break order for equal-time marks.
KIND_ORDER = {
    CROSS: 0,
    ARROW: 1,
    DOT_ARROW: 2,
    D_ARROW: 3,
    C_PLUS_DOT_ARROW: 4,
    D_PLUS_ARROW: 5,
}

# Marks whose tip can place an occupant at their target site.
ARROW_KINDS = frozenset({ARROW, DOT_ARROW, D_ARROW, C_PLUS_DOT_ARROW, D_PLUS_ARROW})

RATE_TOL = 1e-12


class Mark(NamedTuple):
    """One Poisson mark.  ``source``/``dot`` are None where meaningless."""

    time: float
    kind: str
    target: int
    source: int | None = None
    dot: int | None = None


def _sort_key(mark: Mark):
    return (
        mark.time,
        KIND_ORDER[mark.kind],
        mark.target,
        -1 if mark.source is None else mark.source,
        -1 if mark.dot is None else mark.dot,
    )


class EventLog:
    """Immutable, time-sorted mark collection over one sampling window.

    Marks cover ``[t_start - history, t_end]``; the sub-window before
    ``t_start`` exists only so that backward-looking classification near
    ``t_start`` has something to look at, and is never applied by the
    evolution routines.
    """

    __slots__ = (
        "t_start",
        "t_end",
        "history",
        "flavor",
        "marks",
        "intensities",
        "side",
        "dim",
        "seed",
        "_crosses_at",
        "_arrows_into",
    )

    def __init__(
        self,
        t_start: float,
        t_end: float,
        history: float,
        flavor: str,
        marks: Iterable[Mark],
        intensities: dict[str, float],
        side: int,
        dim: int,
        seed: int | None = None,
    ):
        if flavor not in (STANDARD, EQUAL_RATE, COUPLED):
            raise DomainError(f"unknown flavor {flavor!r}")
        if t_end < t_start:
            raise DomainError(f"empty window ({t_start}, {t_end})")
        self.t_start = float(t_start)
        self.t_end = float(t_end)
        self.history = float(history)
        self.flavor = flavor
        self.marks = tuple(sorted(marks, key=_sort_key))
        self.intensities = dict(intensities)
        self.side = side
        self.dim = dim
        self.seed = seed
        self._crosses_at = None
        self._arrows_into = None

    def __len__(self) -> int:
        return len(self.marks)

    def window_marks(
        self, t_from: float | None = None, t_to: float | None = None
    ) -> Iterable[tuple[int, Mark]]:
        """Marks with t_from < time <= t_to (window bounds by default), with index."""
        lo = self.t_start if t_from is None else t_from
        hi = self.t_end if t_to is None else t_to
        for i, m in enumerate(self.marks):
            if m.time > lo:
                if m.time > hi:
                    break
                yield i, m

    def _ensure_site_indexes(self) -> None:
        if self._crosses_at is not None:
            return
        crosses: dict[int, list[float]] = {}
        arrows: dict[int, list[float]] = {}
        for m in self.marks:  # already time-sorted
            if m.kind == CROSS:
                crosses.setdefault(m.target, []).append(m.time)
            elif m.kind in ARROW_KINDS:
                arrows.setdefault(m.target, []).append(m.time)
        self._crosses_at = crosses
        self._arrows_into = arrows

    def last_cross_at(self, site: int, before: float) -> float | None:
        self._ensure_site_indexes()
        times = self._crosses_at.get(site)
        if not times:
            return None
        i = bisect_left(times, before)
        return times[i - 1] if i > 0 else None

    def last_arrow_into(self, site: int, before: float) -> float | None:
        self._ensure_site_indexes()
        times = self._arrows_into.get(site)
        if not times:
            return None
        i = bisect_left(times, before)
        return times[i - 1] if i > 0 else None

    def crosses_at_between(self, site: int, lo: float, hi: float) -> list[float]:
        """Cross times at ``site`` with lo < time < hi, ascending."""
        self._ensure_site_indexes()
        times = self._crosses_at.get(site, [])
        return [t for t in times if lo < t < hi]

    # ------------------------------------------------------- serialization

    def to_text(self) -> str:
        lines = [
            "# coopsim event log v1",
            f"flavor={self.flavor}",
            f"window={self.t_start!r} {self.t_end!r}",
            f"history={self.history!r}",
            f"torus={self.side} {self.dim}",
            f"seed={'-' if self.seed is None else self.seed}",
        ]
        for kind in sorted(self.intensities):
            lines.append(f"intensity {kind}={self.intensities[kind]!r}")
        for m in self.marks:
            src = "-" if m.source is None else m.source
            dot = "-" if m.dot is None else m.dot
            lines.append(f"{m.time!r} {m.kind} {m.target} {src} {dot}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EventLog":
        header: dict[str, str] = {}
        intensities: dict[str, float] = {}
        marks: list[Mark] = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("intensity "):
                key, value = line[len("intensity "):].split("=", 1)
                intensities[key] = float(value)
            elif "=" in line and line.split("=", 1)[0] in (
                "flavor",
                "window",
                "history",
                "torus",
                "seed",
            ):
                key, value = line.split("=", 1)
                header[key] = value
            else:
                t_str, kind, target, src, dot = line.split()
                marks.append(
                    Mark(
                        time=float(t_str),
                        kind=kind,
                        target=int(target),
                        source=None if src == "-" else int(src),
                        dot=None if dot == "-" else int(dot),
                    )
                )
        t_start, t_end = (float(v) for v in header["window"].split())
        side, dim = (int(v) for v in header["torus"].split())
        seed = None if header["seed"] == "-" else int(header["seed"])
        return cls(
            t_start=t_start,
            t_end=t_end,
            history=float(header["history"]),
            flavor=header["flavor"],
            marks=marks,
            intensities=intensities,
            side=side,
            dim=dim,
            seed=seed,
        )


def _stream_intensities(p: Params, flavor: str, p2: Params | None) -> dict[str, float]:
    """Per-channel rates, keyed by mark kind."""
    two_d = 2.0 * p.dim
    if flavor == STANDARD:
        return {
            CROSS: 1.0,
            ARROW: p.beta / two_d,
            DOT_ARROW: p.beta_c / (two_d * two_d),
            D_ARROW: p.beta_d / two_d,
        }
    if flavor == EQUAL_RATE:
        required = equal_rate_benefit(p.beta_d, p.dim)
        if abs(p.beta_c - required) > RATE_TOL:
            raise FlavorMismatch(
                f"equal-rate sampling needs beta_c = {required!r}, got {p.beta_c!r}"
            )
        return {
            CROSS: 1.0,
            ARROW: p.beta / two_d,
            DOT_ARROW: p.beta_c / (two_d * two_d),
        }
    if flavor == COUPLED:
        if p2 is None:
            raise DomainError("coupled sampling needs the second parameter set")
        if p2.dim != p.dim or p2.beta != p.beta:
            raise CouplingOrder("coupled processes must share beta and dim")
        if p.beta_c < p2.beta_c or p.beta_d > p2.beta_d:
            raise CouplingOrder(
                "first process must have beta_c >= and beta_d <= the second's"
            )
        return {
            CROSS: 1.0,
            ARROW: p.beta / two_d,
            DOT_ARROW: p2.beta_c / (two_d * two_d),
            D_ARROW: p.beta_d / two_d,
            C_PLUS_DOT_ARROW: (p.beta_c - p2.beta_c) / (two_d * two_d),
            D_PLUS_ARROW: (p2.beta_d - p.beta_d) / two_d,
        }
    raise DomainError(f"unknown flavor {flavor!r}")


def sample_event_log(
    p: Params,
    torus: Torus,
    t_max: float,
    rng: np.random.Generator,
    flavor: str = STANDARD,
    p2: Params | None = None,
    history: float = 2.0,
    seed: int | None = None,
) -> EventLog:
    """Draw every Poisson stream over ``[-history, t_max]``.

    Channel counts: per site there are 2d directed arrow channels (one per
    neighbor slot) and 4d^2 dot channels (neighbor slot for the source,
    neighbor-of-source slot for the dot).  Streams are drawn in a fixed
    order so a given generator state always yields the same log.
    """
    if t_max <= 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    if history < 0:
        raise DomainError(f"history must be nonnegative, got {history}")
    if torus.dim != p.dim:
        raise DomainError(f"params dim {p.dim} != torus dim {torus.dim}")
    rates = _stream_intensities(p, flavor, p2)
    n = torus.n_sites
    two_d = 2 * torus.dim
    duration = t_max + history
    t_lo = -history
    neighbors = torus.neighbors

    marks: list[Mark] = []
    for kind in sorted(rates, key=KIND_ORDER.get):
        rate = rates[kind]
        if kind == CROSS:
            n_channels = n
        elif kind in (ARROW, D_ARROW, D_PLUS_ARROW):
            n_channels = n * two_d
        else:
            n_channels = n * two_d * two_d
        if rate <= 0.0:
            continue
        count = int(rng.poisson(rate * n_channels * duration))
        times = rng.uniform(t_lo, t_max, size=count)
        channels = rng.integers(0, n_channels, size=count)
        if kind == CROSS:
            marks.extend(
                Mark(float(t), kind, int(ch)) for t, ch in zip(times, channels)
            )
        elif kind in (ARROW, D_ARROW, D_PLUS_ARROW):
            for t, ch in zip(times, channels):
                x, slot = divmod(int(ch), two_d)
                marks.append(Mark(float(t), kind, x, neighbors[x][slot]))
        else:  # dot-arrow families
            for t, ch in zip(times, channels):
                x, rest = divmod(int(ch), two_d * two_d)
                slot_y, slot_z = divmod(rest, two_d)
                y = neighbors[x][slot_y]
                marks.append(Mark(float(t), kind, x, y, neighbors[y][slot_z]))
    return EventLog(
        t_start=0.0,
        t_end=t_max,
        history=history,
        flavor=flavor,
        marks=marks,
        intensities=rates,
        side=torus.side,
        dim=torus.dim,
        seed=seed,
    )


# ------------------------------------------------------------------ evolution


def _check_geometry(c0: Torus, log: EventLog) -> None:
    if (c0.side, c0.dim) != (log.side, log.dim):
        raise DomainError(
            f"configuration torus {(c0.side, c0.dim)} does not match "
            f"log torus {(log.side, log.dim)}"
        )


def evolve_from_log(
    c0: Torus,
    log: EventLog,
    drop_self_dotted: bool = False,
    cooperator_blocked: frozenset[int] | set[int] = frozenset(),
    t_from: float | None = None,
    t_to: float | None = None,
) -> Torus:
    """Deterministically apply the window marks to a copy of ``c0``.

    ``drop_self_dotted`` ignores dot-arrows whose dot is their own target.
    ``cooperator_blocked`` holds mark indexes (positions in ``log.marks``)
    whose cooperator-birth eligibility is suppressed; defector use of the
    same marks, where the flavor allows it, is unaffected.  ``t_from`` /
    ``t_to`` override the applied sub-window, e.g. to warm a configuration
    up through the pre-window history marks.
    """
    if log.flavor not in (STANDARD, EQUAL_RATE):
        raise FlavorMismatch(f"cannot single-evolve a {log.flavor!r} log")
    _check_geometry(c0, log)
    state = c0.copy()
    sites = state.sites
    equal_rate = log.flavor == EQUAL_RATE
    for idx, m in log.window_marks(t_from, t_to):
        if m.kind == CROSS:
            sites[m.target] = EMPTY
        elif m.kind == ARROW:
            if sites[m.target] == EMPTY and sites[m.source] != EMPTY:
                sites[m.target] = sites[m.source]
        elif m.kind == D_ARROW:
            if sites[m.target] == EMPTY and sites[m.source] == DEFECTOR:
                sites[m.target] = DEFECTOR
        elif m.kind == DOT_ARROW:
            if drop_self_dotted and m.dot == m.target:
                continue
            if sites[m.target] != EMPTY:
                continue
            src = sites[m.source]
            if (
                src == COOPERATOR
                and sites[m.dot] == COOPERATOR
                and idx not in cooperator_blocked
            ):
                sites[m.target] = COOPERATOR
            elif equal_rate and src == DEFECTOR and m.dot != m.target:
                sites[m.target] = DEFECTOR
        else:  # difference streams never appear outside coupled logs
            raise FlavorMismatch(f"mark kind {m.kind!r} in a {log.flavor!r} log")
    return state


# Pairs (first-process state, second-process state) preserved by every mark.
ALLOWED_PAIRS = frozenset(
    {
        (COOPERATOR, COOPERATOR),
        (DEFECTOR, DEFECTOR),
        (EMPTY, EMPTY),
        (COOPERATOR, DEFECTOR),
        (COOPERATOR, EMPTY),
        (EMPTY, DEFECTOR),
    }
)


def coupled_evolve(c0_first: Torus, c0_second: Torus, log: EventLog) -> tuple[Torus, Torus]:
    """Drive both processes off one shared coupled-flavor log.

    The first process must start cooperator-richer and defector-poorer
    site by site; every mark preserves that comparison, which the routine
    re-checks at each application.
    """
    if log.flavor != COUPLED:
        raise FlavorMismatch(f"coupled_evolve needs a coupled log, got {log.flavor!r}")
    _check_geometry(c0_first, log)
    _check_geometry(c0_second, log)
    for x, (a, b) in enumerate(zip(c0_first.sites, c0_second.sites)):
        if (a, b) not in ALLOWED_PAIRS:
            raise DomainError(
                f"initial configurations violate the coupling order at site {x}: "
                f"({lattice.STATE_CHARS[a]}, {lattice.STATE_CHARS[b]})"
            )
    first = c0_first.copy()
    second = c0_second.copy()
    s1, s2 = first.sites, second.sites
    for _, m in log.window_marks():
        x = m.target
        if m.kind == CROSS:
            s1[x] = EMPTY
            s2[x] = EMPTY
        elif m.kind == ARROW:
            if s1[x] == EMPTY and s1[m.source] != EMPTY:
                s1[x] = s1[m.source]
            if s2[x] == EMPTY and s2[m.source] != EMPTY:
                s2[x] = s2[m.source]
        elif m.kind == D_ARROW:
            if s1[x] == EMPTY and s1[m.source] == DEFECTOR:
                s1[x] = DEFECTOR
            if s2[x] == EMPTY and s2[m.source] == DEFECTOR:
                s2[x] = DEFECTOR
        elif m.kind == DOT_ARROW:
            if s1[x] == EMPTY and s1[m.source] == COOPERATOR and s1[m.dot] == COOPERATOR:
                s1[x] = COOPERATOR
            if s2[x] == EMPTY and s2[m.source] == COOPERATOR and s2[m.dot] == COOPERATOR:
                s2[x] = COOPERATOR
        elif m.kind == C_PLUS_DOT_ARROW:
            if s1[x] == EMPTY and s1[m.source] == COOPERATOR and s1[m.dot] == COOPERATOR:
                s1[x] = COOPERATOR
        elif m.kind == D_PLUS_ARROW:
            if s2[x] == EMPTY and s2[m.source] == DEFECTOR:
                s2[x] = DEFECTOR
        if (s1[x], s2[x]) not in ALLOWED_PAIRS:
            from coopsim.errors import InclusionViolation

            raise InclusionViolation(
                f"pair ({lattice.STATE_CHARS[s1[x]]}, {lattice.STATE_CHARS[s2[x]]}) "
                f"at site {x}, time {m.time!r} after a {m.kind} mark"
            )
    return first, second


# --------------------------------------------------------------- sterility


def sterile_probability(beta: float, beta_c: float) -> float:
    """Chance that a dot-arrow's local mark pattern proves its dot empty.

    The dot site is provably empty when its last death mark is less than
    one time unit old while its last incoming arrow is between one and two
    units old: the death happened after the arrow, and no birth has been
    possible since.
    """
    s = beta + beta_c
    if s <= 0:
        raise DomainError(f"need beta + beta_c > 0, got {s}")
    return (1.0 - math.exp(-1.0)) * (1.0 - math.exp(-s)) * math.exp(-s)


def classify_sterile(log: EventLog, mark_index: int) -> bool:
    """Decide sterility of the dot-arrow at ``log.marks[mark_index]``.

    Writing s for the mark time, u for the last death mark at the dot site
    and v for the last arrow of any kind pointing at the dot site, the
    mark is sterile exactly when s - u < 1 < s - v < 2.  Raises
    :class:`InsufficientHistory` when the sampled window cannot pin down
    the truth value.
    """
    try:
        mark = log.marks[mark_index]
    except IndexError:
        raise DomainError(f"no mark at index {mark_index}") from None
    if mark.kind not in (DOT_ARROW, C_PLUS_DOT_ARROW):
        raise DomainError(f"mark {mark_index} is a {mark.kind}, not a dot-arrow")
    z = mark.dot
    s = mark.time
    lo = log.t_start - log.history

    u = log.last_cross_at(z, s)
    if u is None:
        if lo <= s - 1.0:
            return False  # any unseen death mark is at least one unit old
        raise InsufficientHistory(
            f"cannot locate the last death mark at site {z} before {s!r}"
        )
    if not s - u < 1.0:
        return False

    v = log.last_arrow_into(z, s)
    if v is None:
        if lo <= s - 2.0:
            return False  # any unseen arrow is at least two units old
        raise InsufficientHistory(
            f"cannot locate the last arrow into site {z} before {s!r}"
        )
    return 1.0 < s - v < 2.0


def estimate_sterile(
    beta: float,
    beta_c: float,
    replicas: int,
    rng: np.random.Generator,
    side: int = 60,
    window: float = 20.0,
) -> tuple[float, float]:
    """Monte Carlo sterile frequency of dot-arrows at well-separated probes.

    Samples standard-flavor logs (with no defector bonus, so that arrows
    into a site arrive at total rate beta + beta_c) and classifies one
    probe dot-arrow per cell of a fixed space-time grid whose cells are
    more than 2 apart in space or in time.  Conditioning a Poisson stream
    on carrying a point at a chosen location leaves the remaining marks'
    law untouched, so inserting the probes instead of hunting for nearby
    realized marks loads no bias into their surroundings, and the grid
    separation makes the classifications read disjoint mark sets: the
    samples are independent Bernoulli draws.  Competitive selection among
    the realized dot-arrows would instead skew the local mark pattern
    (being picked anti-correlates with recent arrows into the dot site).

    Returns the sterile frequency and its binomial standard error.
    """
    if replicas < 1:
        raise DomainError(f"need at least one sample, got {replicas}")
    if side < 8 or window <= 1.0:
        raise DomainError("probe grid needs side >= 8 and window > 1")
    p = Params(beta, beta_c, 0.0, 1)
    torus = Torus(side, 1)
    probe_sites = range(0, side - 4, 5)  # pairwise torus distance >= 5
    probe_times = np.arange(0.5, window, 3.0)  # pairwise gap 3 > 2
    done = 0
    sterile_total = 0
    while done < replicas:
        base = sample_event_log(p, torus, window, rng, flavor=STANDARD)
        probes = [
            # dot at z, source z+1, target z+2: never an arrow into any probe site
            Mark(float(s), DOT_ARROW, (z + 2) % side, (z + 1) % side, z)
            for z in probe_sites
            for s in probe_times
        ]
        log = EventLog(
            t_start=base.t_start,
            t_end=base.t_end,
            history=base.history,
            flavor=base.flavor,
            marks=base.marks + tuple(probes),
            intensities=base.intensities,
            side=base.side,
            dim=base.dim,
        )
        probe_keys = {(m.time, m.dot) for m in probes}
        for i, m in enumerate(log.marks):
            if m.kind == DOT_ARROW and (m.time, m.dot) in probe_keys:
                sterile_total += classify_sterile(log, i)
                done += 1
                if done == replicas:
                    break
    freq = sterile_total / replicas
    stderr = math.sqrt(freq * (1.0 - freq) / replicas)
    return freq, stderr


# --------------------------------------------------------------- dual tree


@dataclass(frozen=True, slots=True)
class DualNode:
    """One backward path segment of the ancestor tree.

    ``sigma`` counts dual time: 0 at the tree origin, growing toward the
    past.  ``sigma_stop`` is the dual time of the stopping death mark, or
    the window horizon when the segment reaches the bottom alive.
    """

    site: int
    index: tuple[int, ...]
    sigma_start: float
    sigma_stop: float
    stopped_by_cross: bool


@dataclass(frozen=True, slots=True)
class DualTree:
    origin_site: int
    origin_time: float
    horizon: float  # largest dual time traced (origin_time - log.t_start)
    nodes: tuple[DualNode, ...]  # sorted by hierarchy index

    def ancestors_at_horizon(self) -> list[DualNode]:
        """Segments alive at the window bottom, in hierarchy order."""
        return [n for n in self.nodes if not n.stopped_by_cross]


def build_dual(log: EventLog, x: int, t: float, max_nodes: int = 1_000_000) -> DualTree:
    """Trace every potential-ancestor path of ``(x, t)`` back to the window start.

    Self-dotted arrows are skipped (they can never place an occupant), all
    other arrow kinds are crossed tail-ward.  Children of a segment are
    indexed 1, 2, ... in the order their arrows are met walking up from
    the segment's stopping mark.
    """
    if not (log.t_start < t <= log.t_end):
        raise DomainError(f"time {t!r} outside the log window")
    if not (0 <= x < log.side**log.dim):
        raise DomainError(f"site {x} not on the log's torus")

    # Arrows pointing at each site, time-ascending: (time, source).
    arrows_into: dict[int, list[tuple[float, int]]] = {}
    for m in log.marks:
        if m.kind in ARROW_KINDS and m.time <= t:
            if m.kind in (DOT_ARROW, C_PLUS_DOT_ARROW) and m.dot == m.target:
                continue
            arrows_into.setdefault(m.target, []).append((m.time, m.source))

    nodes: list[DualNode] = []
    # Work stack of (site, real time the segment is entered, hierarchy index).
    stack: list[tuple[int, float, tuple[int, ...]]] = [(x, t, (1,))]
    while stack:
        site, r_hi, index = stack.pop()
        if len(nodes) >= max_nodes:
            from coopsim.errors import BudgetExhausted

            err = BudgetExhausted(f"dual tree exceeded {max_nodes} segments")
            err.partial = tuple(nodes)
            raise err
        cross = log.last_cross_at(site, r_hi)
        if cross is not None and cross >= log.t_start:
            r_lo, stopped = cross, True
        else:
            r_lo, stopped = log.t_start, False
        nodes.append(
            DualNode(
                site=site,
                index=index,
                sigma_start=t - r_hi,
                sigma_stop=t - r_lo,
                stopped_by_cross=stopped,
            )
        )
        i = 0
        for a_time, a_source in arrows_into.get(site, ()):  # time ascending
            if r_lo < a_time < r_hi:
                i += 1
                stack.append((a_source, a_time, index + (i,)))
    nodes.sort(key=lambda n: n.index)
    return DualTree(origin_site=x, origin_time=t, horizon=t - log.t_start, nodes=tuple(nodes))


ORIGIN_EMPTY = "empty"
ORIGIN_DEFECTOR = "defector"
ORIGIN_INDETERMINATE = "indeterminate"


def resolve_origin_type(tree: DualTree, initial: Torus) -> str:
    """Partial type resolution of the tree origin from the starting state.

    If every window-surviving ancestor starts empty, nothing could have
    propagated up and the origin is empty.  If the first occupied ancestor
    in hierarchy order holds a defector, the origin holds one too, because
    defectors travel through every arrow unconditionally.  A first
    occupied ancestor holding a cooperator is not resolved: its climb may
    be blocked at any dot-arrow whose dot state the tree does not carry.
    """
    for node in tree.ancestors_at_horizon():
        state = initial.sites[node.site]
        if state == EMPTY:
            continue
        return ORIGIN_DEFECTOR if state == DEFECTOR else ORIGIN_INDETERMINATE
    return ORIGIN_EMPTY


# ------------------------------------------------- engine equivalence check


@dataclass(frozen=True, slots=True)
class EquivalenceReport:
    """Two-sample chi-square comparison of the two engines' count laws."""

    statistics: tuple[float, float, float]  # per tracked state: c, d, e
    p_values: tuple[float, float, float]
    dofs: tuple[int, int, int]
    significance: float
    passed: bool


def _chi2_two_sample(counts_a: np.ndarray, counts_b: np.ndarray) -> tuple[float, float, int]:
    """Two-sample chi-square on histograms with adaptive bin merging."""
    values = np.union1d(counts_a, counts_b)
    hist_a = np.array([(counts_a == v).sum() for v in values], dtype=float)
    hist_b = np.array([(counts_b == v).sum() for v in values], dtype=float)
    # merge sparse adjacent bins so expected counts stay chi-square friendly
    merged_a: list[float] = []
    merged_b: list[float] = []
    acc_a = acc_b = 0.0
    for a, b in zip(hist_a, hist_b):
        acc_a += a
        acc_b += b
        if acc_a + acc_b >= 10.0:
            merged_a.append(acc_a)
            merged_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a or acc_b:
        if merged_a:
            merged_a[-1] += acc_a
            merged_b[-1] += acc_b
        else:
            merged_a.append(acc_a)
            merged_b.append(acc_b)
    a = np.asarray(merged_a)
    b = np.asarray(merged_b)
    if len(a) < 2:
        return 0.0, 1.0, 0
    n_a, n_b = a.sum(), b.sum()
    pooled = (a + b) / (n_a + n_b)
    expected_a = pooled * n_a
    expected_b = pooled * n_b
    stat = float(((a - expected_a) ** 2 / expected_a).sum()
                 + ((b - expected_b) ** 2 / expected_b).sum())
    dof = len(a) - 1
    return stat, float(stats.chi2.sf(stat, dof)), dof


def distributional_equivalence_check(
    p: Params,
    init: Torus,
    t_probe: float,
    replicas: int,
    rng: np.random.Generator,
    significance: float = 0.01,
) -> EquivalenceReport:
    """Compare the event-driven engine to mark-set evolution statistically.

    Both engines run ``replicas`` independent trials from the same initial
    configuration; the three occupancy-count distributions at ``t_probe``
    are compared by two-sample chi-square tests with a Bonferroni-adjusted
    significance level.
    """
    if replicas < 2:
        raise DomainError("need at least two replicas per engine")
    counts_a = np.empty((replicas, 3), dtype=np.int64)
    counts_b = np.empty((replicas, 3), dtype=np.int64)
    for i in range(replicas):
        torus = init.copy()
        lattice.run(torus, p, t_probe, rng, sample_interval=max(t_probe, 1e-9))
        counts_a[i] = torus.counts()
    if t_probe == 0:
        counts_b[:] = init.counts()
    else:
        for i in range(replicas):
            log = sample_event_log(p, init, t_probe, rng, flavor=STANDARD, history=0.0)
            final = evolve_from_log(init, log)
            counts_b[i] = final.counts()
    stats_out = []
    ps = []
    dofs = []
    for k in range(3):
        stat, p_value, dof = _chi2_two_sample(counts_a[:, k], counts_b[:, k])
        stats_out.append(stat)
        ps.append(p_value)
        dofs.append(dof)
    level = significance / 3.0
    return EquivalenceReport(
        statistics=tuple(stats_out),
        p_values=tuple(ps),
        dofs=tuple(dofs),
        significance=significance,
        passed=all(pv >= level for pv in ps),
    )
