"""Event-driven simulation of the cooperator/defector process on finite tori.

Sites of a d-dimensional torus are empty, occupied by a cooperator, or
occupied by a defector.  Occupied sites die at rate one.  An empty site x
gains a cooperator at rate

    sum over cooperator neighbors y of
        beta / (2 d)  +  beta_c / (4 d^2) * #{cooperator neighbors z of y}

(z runs over all 2d neighbors of y, including x itself) and gains a
defector at rate ``#defector neighbors * (beta + beta_d) / (2 d)``.

The sampler is an exact Gillespie direct method.  Event selection scans
sites, then directed neighbor pairs in a fixed order, so that when
``beta_c == beta_d == 0`` swapping the two type labels in the initial
configuration mirrors the whole run exactly, draw for draw.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import Absorbed, DomainError, OccupiedSite
from .params import Params

EMPTY, COOPERATOR, DEFECTOR = 0, 1, 2
STATE_CHARS = {EMPTY: "e", COOPERATOR: "c", DEFECTOR: "d"}
CHAR_STATES = {v: k for k, v in STATE_CHARS.items()}


class Torus(object):
    """Periodic d-dimensional lattice with one state per site.

    Site indices are flat: coordinates (c_0, ..., c_{d-1}) map to
    ``sum(c_j * side**j)``.  Each site has exactly ``2 * dim`` neighbors,
    listed axis by axis as (-e_j, +e_j); on a side-2 torus both directions
    reach the same site and the neighbor list repeats it, keeping every
    per-pair rate channel present.
    """

    __slots__ = ("dim", "side", "n_sites", "sites", "neighbors", "near2")

    def __init__(self, side: int, dim: int = 1, sites: Sequence[int] | None = None):
        if side < 2:
            raise DomainError(f"torus side must be at least 2, got {side}")
        if dim < 1:
            raise DomainError(f"torus dim must be at least 1, got {dim}")
        self.dim = dim
        self.side = side
        self.n_sites = side**dim
        if sites is None:
            self.sites = [EMPTY] * self.n_sites
        else:
            if len(sites) != self.n_sites:
                raise DomainError(
                    f"expected {self.n_sites} site states, got {len(sites)}"
                )
            bad = set(sites) - {EMPTY, COOPERATOR, DEFECTOR}
            if bad:
                raise DomainError(f"invalid site states: {bad}")
            self.sites = list(sites)
        self.neighbors = _neighbor_table(side, dim)
        self.near2 = _near2_table(self.neighbors)

    def coords(self, i: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.dim):
            out.append(i % self.side)
            i //= self.side
        return tuple(out)

    def index(self, coords: Sequence[int]) -> int:
        i = 0
        for j in reversed(range(self.dim)):
            i = i * self.side + (coords[j] % self.side)
        return i

    def counts(self) -> tuple[int, int, int]:
        """(cooperators, defectors, empty)."""
        n_c = self.sites.count(COOPERATOR)
        n_d = self.sites.count(DEFECTOR)
        return n_c, n_d, self.n_sites - n_c - n_d

    def copy(self) -> "Torus":
        dup = object.__new__(Torus)
        dup.dim = self.dim
        dup.side = self.side
        dup.n_sites = self.n_sites
        dup.sites = list(self.sites)
        dup.neighbors = self.neighbors
        dup.near2 = self.near2
        return dup

    def swap_types(self) -> "Torus":
        """Copy with cooperator and defector labels exchanged."""
        swap = {EMPTY: EMPTY, COOPERATOR: DEFECTOR, DEFECTOR: COOPERATOR}
        dup = self.copy()
        dup.sites = [swap[s] for s in self.sites]
        return dup

    def state_string(self) -> str:
        return "".join(STATE_CHARS[s] for s in self.sites)

    @classmethod
    def from_state_string(cls, text: str, dim: int = 1) -> "Torus":
        side = round(len(text) ** (1.0 / dim))
        if side**dim != len(text):
            raise DomainError(f"{len(text)} sites do not fill a dim-{dim} torus")
        return cls(side, dim, [CHAR_STATES[ch] for ch in text])


def _neighbor_table(side: int, dim: int) -> list[tuple[int, ...]]:
    n = side**dim
    strides = [side**j for j in range(dim)]
    table = []
    for i in range(n):
        coords = []
        rem = i
        for _ in range(dim):
            coords.append(rem % side)
            rem //= side
        nbrs = []
        for j in range(dim):
            for delta in (-1, 1):
                c = (coords[j] + delta) % side
                nbrs.append(i + (c - coords[j]) * strides[j])
        table.append(tuple(nbrs))
    return table


def _near2_table(neighbors: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    table = []
    for i, nbrs in enumerate(neighbors):
        seen = {i}
        seen.update(nbrs)
        for y in nbrs:
            seen.update(neighbors[y])
        table.append(tuple(sorted(seen)))
    return table


def product_measure(
    side: int,
    dim: int,
    rho_c: float,
    rho_d: float,
    rng: np.random.Generator,
) -> Torus:
    """Independent per-site states with P(c) = rho_c, P(d) = rho_d."""
    if rho_c < 0 or rho_d < 0 or rho_c + rho_d > 1:
        raise DomainError(f"densities ({rho_c}, {rho_d}) not a sub-probability")
    u = rng.random(side**dim)
    sites = [
        COOPERATOR if v < rho_c else (DEFECTOR if v < rho_c + rho_d else EMPTY)
        for v in u
    ]
    return Torus(side, dim, sites)


def birth_rate_c(torus: Torus, x: int, p: Params) -> float:
    """Cooperator birth rate onto empty site ``x``.

    Computed as ``n_pairs * beta/(2d) + pair_support * beta_c/(4d^2)`` with
    integer counts, so the ``beta_c == 0`` reduction to
    ``#cooperator-neighbors * beta/(2d)`` is exact.
    """
    if torus.sites[x] != EMPTY:
        raise OccupiedSite(f"site {x} is not empty")
    if p.dim != torus.dim:
        raise DomainError(f"params dim {p.dim} != torus dim {torus.dim}")
    sites = torus.sites
    neighbors = torus.neighbors
    n_pairs = 0
    pair_support = 0
    for y in neighbors[x]:
        if sites[y] == COOPERATOR:
            n_pairs += 1
            for z in neighbors[y]:
                if sites[z] == COOPERATOR:
                    pair_support += 1
    two_d = 2.0 * torus.dim
    return n_pairs * (p.beta / two_d) + pair_support * (p.beta_c / (two_d * two_d))


def birth_rate_d(torus: Torus, x: int, p: Params) -> float:
    """Defector birth rate onto empty site ``x``."""
    if torus.sites[x] != EMPTY:
        raise OccupiedSite(f"site {x} is not empty")
    if p.dim != torus.dim:
        raise DomainError(f"params dim {p.dim} != torus dim {torus.dim}")
    sites = torus.sites
    n_pairs = 0
    for y in torus.neighbors[x]:
        if sites[y] == DEFECTOR:
            n_pairs += 1
    return n_pairs * ((p.beta + p.beta_d) / (2.0 * torus.dim))


class Event(NamedTuple):
    kind: str  # "death" | "birth"
    site: int
    parent: int | None  # occupied neighbor the birth came through
    state: int  # site state after the event
    prev: int  # site state before the event


class RateTable:
    """Per-site event rates with cached per-kind totals.

    ``site_total`` drives selection: 1.0 for occupied sites (their death
    clock), and for empty sites the sum of directed-pair birth rates taken
    in neighbor order.  ``birth_c`` / ``birth_d`` / ``death`` hold the
    per-site split, and the ``total_*`` attributes are maintained
    incrementally as sites are refreshed.
    """

    __slots__ = (
        "p",
        "site_total",
        "birth_c",
        "birth_d",
        "death",
        "total_birth_c",
        "total_birth_d",
        "total_death",
        "pair_beta",
        "pair_coop",
        "pair_defect",
    )

    def __init__(self, torus: Torus, p: Params):
        if p.dim != torus.dim:
            raise DomainError(f"params dim {p.dim} != torus dim {torus.dim}")
        self.p = p
        two_d = 2.0 * torus.dim
        self.pair_beta = p.beta / two_d
        self.pair_coop = p.beta_c / (two_d * two_d)
        self.pair_defect = (p.beta + p.beta_d) / two_d
        n = torus.n_sites
        self.site_total = np.zeros(n, dtype=np.float64)
        self.birth_c = [0.0] * n
        self.birth_d = [0.0] * n
        self.death = [0.0] * n
        self.total_birth_c = 0.0
        self.total_birth_d = 0.0
        self.total_death = 0.0
        for i in range(n):
            self.refresh_site(torus, i)

    def refresh_site(self, torus: Torus, i: int) -> None:
        """Recompute site ``i`` rates from the configuration."""
        sites = torus.sites
        if sites[i] != EMPTY:
            death, bc, bd, tot = 1.0, 0.0, 0.0, 1.0
        else:
            death = 0.0
            bc = 0.0
            bd = 0.0
            tot = 0.0
            neighbors = torus.neighbors
            pair_beta = self.pair_beta
            pair_coop = self.pair_coop
            pair_defect = self.pair_defect
            for y in neighbors[i]:
                sy = sites[y]
                if sy == COOPERATOR:
                    k = 0
                    for z in neighbors[y]:
                        if sites[z] == COOPERATOR:
                            k += 1
                    r = pair_beta + pair_coop * k
                    bc += r
                    tot += r
                elif sy == DEFECTOR:
                    bd += pair_defect
                    tot += pair_defect
        self.total_birth_c += bc - self.birth_c[i]
        self.total_birth_d += bd - self.birth_d[i]
        self.total_death += death - self.death[i]
        self.birth_c[i] = bc
        self.birth_d[i] = bd
        self.death[i] = death
        self.site_total[i] = tot

    def rebuild(self, torus: Torus) -> "RateTable":
        """Fresh table from scratch (for drift checks against the caches)."""
        return RateTable(torus, self.p)

    @property
    def total_rate(self) -> float:
        return float(self.site_total.sum())


def step(
    torus: Torus,
    table: RateTable,
    p: Params,
    rng: np.random.Generator,
    t_limit: float | None = None,
) -> tuple[Event | None, float]:
    """Advance by one event; returns (event, elapsed).

    Raises :class:`Absorbed` when the total rate is zero.  When ``t_limit``
    is given and the exponential holding time exceeds it, no event is
    selected or applied and ``(None, elapsed)`` is returned, which is the
    exact way to stop a continuous-time chain at a horizon.
    """
    cum = np.cumsum(table.site_total)
    total = float(cum[-1])
    if total <= 0.0:
        raise Absorbed("all sites empty: total event rate is zero")
    elapsed = rng.standard_exponential() / total
    if t_limit is not None and elapsed > t_limit:
        return None, elapsed
    target = rng.random() * total
    i = int(np.searchsorted(cum, target, side="right"))
    if i >= torus.n_sites:
        i = torus.n_sites - 1

    sites = torus.sites
    prev = sites[i]
    if prev != EMPTY:
        event = Event("death", i, None, EMPTY, prev)
    else:
        residual = target - (float(cum[i - 1]) if i > 0 else 0.0)
        neighbors = torus.neighbors
        pair_beta = table.pair_beta
        pair_coop = table.pair_coop
        pair_defect = table.pair_defect
        chosen = None
        for y in neighbors[i]:
            sy = sites[y]
            if sy == COOPERATOR:
                k = 0
                for z in neighbors[y]:
                    if sites[z] == COOPERATOR:
                        k += 1
                r = pair_beta + pair_coop * k
            elif sy == DEFECTOR:
                r = pair_defect
            else:
                continue
            chosen = y
            residual -= r
            if residual < 0.0:
                break
        if chosen is None:  # cannot happen unless site_total[i] was stale
            raise Absorbed(f"no occupied neighbor at selected empty site {i}")
        event = Event("birth", i, chosen, sites[chosen], prev)

    sites[event.site] = event.state
    for w in torus.near2[event.site]:
        table.refresh_site(torus, w)
    return event, elapsed


@dataclass(frozen=True, slots=True)
class TimeSeries:
    """Counts sampled on a fixed grid; constant after absorption."""

    t: np.ndarray
    n_c: np.ndarray
    n_d: np.ndarray
    n_e: np.ndarray


def run(
    torus: Torus,
    p: Params,
    t_end: float,
    rng: np.random.Generator,
    sample_interval: float = 1.0,
    observers: Sequence[Callable[[float, Torus], None]] | None = None,
) -> TimeSeries:
    """Simulate in place until ``t_end``, sampling counts every interval.

    The torus is left in its state at ``t_end``.  Observers are called at
    each sampling time with (time, torus) while the configuration matches
    that sampling time exactly.  ``t_end = 0`` yields the single initial
    sample.
    """
    if t_end < 0 or sample_interval <= 0:
        raise DomainError("t_end must be nonnegative and sample_interval positive")
    if t_end == 0:
        n_c, n_d, n_e = torus.counts()
        if observers:
            for fn in observers:
                fn(0.0, torus)
        return TimeSeries(
            t=np.zeros(1),
            n_c=np.array([n_c], dtype=np.int64),
            n_d=np.array([n_d], dtype=np.int64),
            n_e=np.array([n_e], dtype=np.int64),
        )
    table = RateTable(torus, p)
    sample_times = np.arange(0.0, t_end + sample_interval * 0.5, sample_interval)
    n_samples = len(sample_times)
    n_c, n_d, n_e = torus.counts()
    out_c = np.empty(n_samples, dtype=np.int64)
    out_d = np.empty_like(out_c)
    out_e = np.empty_like(out_c)

    k = 0
    t = 0.0
    alive = True
    window_done = False
    while k < n_samples:
        if alive:
            try:
                event, elapsed = step(torus, table, p, rng, t_limit=t_end - t)
            except Absorbed:
                event = None
                alive = False
        else:
            event = None
        if event is None:
            window_done = True
            while k < n_samples:
                out_c[k], out_d[k], out_e[k] = n_c, n_d, n_e
                if observers:
                    for fn in observers:
                        fn(float(sample_times[k]), torus)
                k += 1
            break
        t_next = t + elapsed
        if k < n_samples and sample_times[k] < t_next:
            # flush samples the event jumped over, at the pre-event state
            torus.sites[event.site] = event.prev
            while k < n_samples and sample_times[k] < t_next:
                out_c[k], out_d[k], out_e[k] = n_c, n_d, n_e
                if observers:
                    for fn in observers:
                        fn(float(sample_times[k]), torus)
                k += 1
            torus.sites[event.site] = event.state
        t = t_next
        if event.kind == "birth":
            n_e -= 1
            if event.state == COOPERATOR:
                n_c += 1
            else:
                n_d += 1
        else:
            n_e += 1
            if event.prev == COOPERATOR:
                n_c -= 1
            else:
                n_d -= 1
    # the last sample time may precede t_end; when the sampling grid was
    # exhausted before the event stream, finish the window so the torus
    # really holds its state at t_end
    while not window_done:
        try:
            event, elapsed = step(torus, table, p, rng, t_limit=t_end - t)
        except Absorbed:
            break
        if event is None:
            break
        t += elapsed
    return TimeSeries(t=sample_times, n_c=out_c, n_d=out_d, n_e=out_e)


@dataclass(frozen=True, slots=True)
class ReplicaOutcome:
    """Final counts of one survival replica."""

    index: int
    n_c: int
    n_d: int
    n_e: int


@dataclass(frozen=True, slots=True)
class SurvivalResult:
    """Replica outcomes plus Wald 95% half-widths for the frequencies.

    A type is alive when its count is positive at the horizon; it wins when
    it is alive and the opponent's count is at or below ``density_floor``
    (0 by default, i.e. strict extinction).  These are finite-horizon,
    finite-volume surrogates for the limit statements, and are labelled as
    such wherever they are written out.
    """

    outcomes: tuple[ReplicaOutcome, ...]
    density_floor: int = 0

    def freq(self, predicate: Callable[[ReplicaOutcome], bool]) -> float:
        if not self.outcomes:
            return float("nan")
        return sum(1 for o in self.outcomes if predicate(o)) / len(self.outcomes)

    def halfwidth(self, freq: float) -> float:
        n = len(self.outcomes)
        if n == 0:
            return float("nan")
        return 1.96 * (freq * (1.0 - freq) / n) ** 0.5

    @property
    def freq_c_alive(self) -> float:
        return self.freq(lambda o: o.n_c > 0)

    @property
    def freq_d_alive(self) -> float:
        return self.freq(lambda o: o.n_d > 0)

    @property
    def freq_c_wins(self) -> float:
        floor = self.density_floor
        return self.freq(lambda o: o.n_c > 0 and o.n_d <= floor)

    @property
    def freq_d_wins(self) -> float:
        floor = self.density_floor
        return self.freq(lambda o: o.n_d > 0 and o.n_c <= floor)

    @property
    def freq_both_extinct(self) -> float:
        return self.freq(lambda o: o.n_c == 0 and o.n_d == 0)

    @property
    def freq_coexist(self) -> float:
        return self.freq(lambda o: o.n_c > 0 and o.n_d > 0)


def replica_rng(master_seed: int, index: int) -> np.random.Generator:
    """The RNG stream owned by one replica: (master seed, replica index)."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _survival_replica(args: tuple) -> ReplicaOutcome:
    (index, master_seed, beta, beta_c, beta_d, dim, side, rho_c, rho_d, horizon) = args
    p = Params(beta, beta_c, beta_d, dim)
    rng = replica_rng(master_seed, index)
    torus = product_measure(side, dim, rho_c, rho_d, rng)
    table = RateTable(torus, p)
    t = 0.0
    while True:
        try:
            event, elapsed = step(torus, table, p, rng, t_limit=horizon - t)
        except Absorbed:
            break
        if event is None:
            break
        t += elapsed
    n_c, n_d, n_e = torus.counts()
    return ReplicaOutcome(index, n_c, n_d, n_e)


def survival_estimate(
    p: Params,
    side: int,
    horizon: float,
    replicas: int,
    rho_c: float,
    rho_d: float,
    master_seed: int,
    density_floor: int = 0,
    jobs: int = 1,
) -> SurvivalResult:
    """Monte Carlo survival/win frequencies from product-measure starts.

    Replica ``i`` draws everything from its own stream seeded by
    ``(master_seed, i)``, so results are identical for any ``jobs`` value
    and any batching of the replicas.
    """
    if replicas < 1:
        raise DomainError(f"need at least one replica, got {replicas}")
    arg_list = [
        (i, master_seed, p.beta, p.beta_c, p.beta_d, p.dim, side, rho_c, rho_d, horizon)
        for i in range(replicas)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_survival_replica, arg_list, chunksize=8))
    else:
        outcomes = [_survival_replica(a) for a in arg_list]
    outcomes.sort(key=lambda o: o.index)
    return SurvivalResult(outcomes=tuple(outcomes), density_floor=density_floor)
