"""Seeded experiment harnesses built on the torus engine.

Three workflows live here: long-format phase-diagram sweeps over the
(cooperation benefit, defection benefit) plane, coupled monotonicity
audits that drive an advantaged and a baseline process off one shared
mark environment, and statistical bisection for the cooperation benefit
at which the typical winner flips.

Every routine is a deterministic function of its arguments: grid points
and bisection evaluations derive their seeds from the master seed, never
from global state.  Survival frequencies measured here are finite-torus,
finite-horizon surrogates for the limit quantities they estimate, and the
serialized outputs say so.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhausted, DomainError
from .graphical import COUPLED, coupled_evolve, sample_event_log
from .lattice import COOPERATOR, DEFECTOR, Torus, product_measure, survival_estimate
from .mean_field import classify_regime
from .params import Params, equal_rate_benefit

__all__ = [
    "SweepSpec",
    "SweepPoint",
    "sweep_phase_diagram",
    "sweep_to_csv",
    "MonotonicityReport",
    "monotonicity_check",
    "CriticalBracket",
    "BracketEvaluation",
    "bracket_critical",
    "bracket_to_json",
]


def _fmt(x: float) -> str:
    """17 significant digits: round-trips every double exactly."""
    return format(x, ".17g")


def point_seed(master_seed: int, index: int) -> int:
    """Derive the integer master seed owned by one grid/search point."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


# ------------------------------------------------------------------ sweeps


@dataclass(frozen=True, slots=True)
class SweepSpec:
    """Grid description for a phase-diagram sweep.

    The winner rule is strict extinction at the horizon: a type wins a
    replica when it is alive and the other type's count is zero, so the
    four outcome classes partition the replicas exactly.
    """

    beta: float
    beta_c_grid: tuple[float, ...]
    beta_d_grid: tuple[float, ...]
    side: int
    dim: int
    horizon: float
    replicas: int
    master_seed: int
    rho_c: float
    rho_d: float

    def __post_init__(self) -> None:
        for name, grid in (("beta_c_grid", self.beta_c_grid), ("beta_d_grid", self.beta_d_grid)):
            if len(grid) == 0:
                raise DomainError(f"{name} must be nonempty")
            if any(a >= b for a, b in zip(grid, grid[1:])):
                raise DomainError(f"{name} must be strictly increasing, got {grid}")
            if grid[0] < 0.0:
                raise DomainError(f"{name} entries must be >= 0, got {grid}")
        if self.replicas < 1:
            raise DomainError(f"replicas must be >= 1, got {self.replicas}")
        if self.horizon <= 0.0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")


@dataclass(frozen=True, slots=True)
class SweepPoint:
    """Outcome tallies at one (beta_c, beta_d) grid point.

    Counts are kept as integers so the partition identity
    ``n_c_wins + n_d_wins + n_coexist + n_both_extinct == replicas``
    holds exactly; the ``freq_*`` properties divide on demand.
    """

    beta_c: float
    beta_d: float
    n_c_wins: int
    n_d_wins: int
    n_coexist: int
    n_both_extinct: int
    replicas: int
    mf_regime: str
    seed: int

    @property
    def freq_c_wins(self) -> float:
        return self.n_c_wins / self.replicas

    @property
    def freq_d_wins(self) -> float:
        return self.n_d_wins / self.replicas

    @property
    def freq_coexist(self) -> float:
        return self.n_coexist / self.replicas

    @property
    def freq_both_extinct(self) -> float:
        return self.n_both_extinct / self.replicas


def sweep_phase_diagram(spec: SweepSpec, jobs: int = 1) -> list[SweepPoint]:
    """Survival-outcome frequencies over the full benefit grid.

    Grid points are visited in row-major order (beta_c outer, beta_d
    inner); point ``i`` runs ``survival_estimate`` under its own derived
    seed, so rerunning any subset of the grid reproduces the same rows.
    The mean-field regime label for the same parameters rides along for
    side-by-side comparison.
    """
    rows: list[SweepPoint] = []
    index = 0
    for beta_c in spec.beta_c_grid:
        for beta_d in spec.beta_d_grid:
            p = Params(spec.beta, beta_c, beta_d, spec.dim)
            seed = point_seed(spec.master_seed, index)
            result = survival_estimate(
                p,
                spec.side,
                spec.horizon,
                spec.replicas,
                spec.rho_c,
                spec.rho_d,
                seed,
                jobs=jobs,
            )
            n_c = sum(1 for o in result.outcomes if o.n_c > 0 and o.n_d == 0)
            n_d = sum(1 for o in result.outcomes if o.n_d > 0 and o.n_c == 0)
            n_co = sum(1 for o in result.outcomes if o.n_c > 0 and o.n_d > 0)
            n_ext = sum(1 for o in result.outcomes if o.n_c == 0 and o.n_d == 0)
            rows.append(
                SweepPoint(
                    beta_c=beta_c,
                    beta_d=beta_d,
                    n_c_wins=n_c,
                    n_d_wins=n_d,
                    n_coexist=n_co,
                    n_both_extinct=n_ext,
                    replicas=spec.replicas,
                    mf_regime=classify_regime(p),
                    seed=seed,
                )
            )
            index += 1
    return rows


def sweep_to_csv(spec: SweepSpec, rows: list[SweepPoint]) -> str:
    """Long-format CSV with the full spec embedded as comment lines."""
    out = [
        "# phase-diagram sweep; frequencies are finite-torus, finite-horizon"
        " surrogates for the limit survival probabilities",
        f"# beta={_fmt(spec.beta)} dim={spec.dim} side={spec.side}"
        f" horizon={_fmt(spec.horizon)} replicas={spec.replicas}",
        f"# rho_c={_fmt(spec.rho_c)} rho_d={_fmt(spec.rho_d)}"
        f" master_seed={spec.master_seed}",
        "beta_c,beta_d,freq_c_wins,freq_d_wins,freq_coexist,freq_both_extinct,"
        "mf_regime,point_seed",
    ]
    for r in rows:
        out.append(
            ",".join(
                [
                    _fmt(r.beta_c),
                    _fmt(r.beta_d),
                    _fmt(r.freq_c_wins),
                    _fmt(r.freq_d_wins),
                    _fmt(r.freq_coexist),
                    _fmt(r.freq_both_extinct),
                    r.mf_regime,
                    str(r.seed),
                ]
            )
        )
    return "\n".join(out) + "\n"


# ------------------------------------------------------------ monotonicity


@dataclass(frozen=True, slots=True)
class MonotonicityReport:
    """Aggregate of coupled favored-vs-base runs on shared mark logs.

    The per-mark pair check inside ``coupled_evolve`` raises on any order
    violation, so a report existing at all certifies the pathwise
    inclusions held throughout every replica window; the fields below add
    the horizon-time summaries.
    """

    base: Params
    favored: Params
    replicas: int
    horizon: float
    c_sets_nested_at_horizon: bool
    d_sets_nested_at_horizon: bool
    identical_trajectories: bool
    freq_c_alive_favored: float
    freq_c_alive_base: float
    freq_d_alive_favored: float
    freq_d_alive_base: float

    def stderr_gap(self) -> float:
        """Worst-case std. error for a difference of two frequencies."""
        return (0.5 / self.replicas**0.5) * 2.0


def monotonicity_check(
    base: Params,
    delta_c: float,
    delta_d: float,
    replicas: int,
    rng: np.random.Generator,
    side: int = 24,
    horizon: float = 4.0,
    rho_c: float = 0.25,
    rho_d: float = 0.25,
) -> MonotonicityReport:
    """Couple a benefit-advantaged process against the base parameters.

    The favored process raises the cooperation benefit by ``delta_c`` and
    lowers the defection benefit by ``delta_d`` (clamped at zero).  Both
    processes start from the same product-measure draw and read one shared
    coupled-flavor log per replica, which forces cooperator sets to nest
    one way and defector sets the other at every instant.
    """
    if delta_c < 0.0 or delta_d < 0.0:
        raise DomainError(f"deltas must be >= 0, got ({delta_c}, {delta_d})")
    if replicas < 1:
        raise DomainError(f"replicas must be >= 1, got {replicas}")
    favored = Params(
        base.beta,
        base.beta_c + delta_c,
        base.beta_d - min(delta_d, base.beta_d),
        base.dim,
    )
    c_nested = True
    d_nested = True
    identical = True
    c_alive_f = c_alive_b = d_alive_f = d_alive_b = 0
    for _ in range(replicas):
        start = product_measure(side, base.dim, rho_c, rho_d, rng)
        torus = Torus(side, dim=base.dim)
        log = sample_event_log(
            favored, torus, horizon, rng, flavor=COUPLED, p2=base
        )
        first, second = coupled_evolve(start, start.copy(), log)
        nc1, nd1, _ = first.counts()
        nc2, nd2, _ = second.counts()
        c_alive_f += nc1 > 0
        c_alive_b += nc2 > 0
        d_alive_f += nd1 > 0
        d_alive_b += nd2 > 0
        pairs = list(zip(first.sites, second.sites))
        c_nested &= all(a == COOPERATOR for a, b in pairs if b == COOPERATOR)
        d_nested &= all(b == DEFECTOR for a, b in pairs if a == DEFECTOR)
        identical &= first.sites == second.sites
    return MonotonicityReport(
        base=base,
        favored=favored,
        replicas=replicas,
        horizon=horizon,
        c_sets_nested_at_horizon=c_nested,
        d_sets_nested_at_horizon=d_nested,
        identical_trajectories=identical,
        freq_c_alive_favored=c_alive_f / replicas,
        freq_c_alive_base=c_alive_b / replicas,
        freq_d_alive_favored=d_alive_f / replicas,
        freq_d_alive_base=d_alive_b / replicas,
    )


# ------------------------------------------------------------- bracketing


@dataclass(frozen=True, slots=True)
class BracketEvaluation:
    """Win frequencies measured at one candidate cooperation benefit."""

    beta_c: float
    freq_c_wins: float
    freq_d_wins: float
    seed: int


@dataclass(frozen=True, slots=True)
class CriticalBracket:
    """Interval estimate for the winner-flip cooperation benefit.

    ``beta_c_low`` is defector-dominant and ``beta_c_high`` is not (the
    initial upper endpoint is additionally cooperator-dominant); the
    finite-size estimate of the flip point lies in between.
    """

    beta_c_low: float
    beta_c_high: float
    evaluations: tuple[BracketEvaluation, ...]
    lower_edge_exceeds_equal_rate_point: bool
    notes: str

    def __post_init__(self) -> None:
        if self.beta_c_low < 0.0 or self.beta_c_low > self.beta_c_high:
            raise DomainError(
                f"need 0 <= low <= high, got ({self.beta_c_low}, {self.beta_c_high})"
            )

    @property
    def width(self) -> float:
        return self.beta_c_high - self.beta_c_low


def bracket_critical(
    beta: float,
    beta_d: float,
    *,
    dim: int = 1,
    side: int,
    horizon: float,
    replicas: int,
    rho_c: float,
    rho_d: float,
    master_seed: int,
    tau: float = 0.9,
    lo: float = 0.0,
    hi: float = 16.0,
    budget: int = 10,
) -> CriticalBracket:
    """Bisect the cooperation benefit until the defector-dominant band ends.

    A point is defector-dominant when its measured ``freq_d_wins``
    exceeds ``tau``.  The search requires ``lo`` dominant and ``hi``
    cooperator-dominant (``freq_c_wins > tau``); every midpoint that stays
    dominant becomes the new lower edge, everything else the new upper
    edge.  ``budget`` caps the total number of survival runs, endpoint
    checks included.

    When even ``lo`` is not defector-dominant the flip happens at or below
    ``lo`` and the degenerate bracket (lo, lo) is returned.  When ``hi``
    fails its check no bracket exists inside the search interval and
    ``BudgetExhausted`` carries the partial result.
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    if lo < 0.0 or lo >= hi:
        raise DomainError(f"need 0 <= lo < hi, got ({lo}, {hi})")
    if budget < 2:
        raise DomainError(f"budget must allow both endpoint checks, got {budget}")

    finite_size_note = (
        f"finite-size estimate: side={side}, horizon={_fmt(horizon)}, "
        f"replicas={replicas}, tau={_fmt(tau)}; winner frequencies are "
        "finite-horizon surrogates, not the limit critical values"
    )
    equal_rate_point = equal_rate_benefit(beta_d, dim)
    evaluations: list[BracketEvaluation] = []

    def measure(beta_c: float) -> BracketEvaluation:
        seed = point_seed(master_seed, len(evaluations))
        result = survival_estimate(
            Params(beta, beta_c, beta_d, dim),
            side,
            horizon,
            replicas,
            rho_c,
            rho_d,
            seed,
        )
        ev = BracketEvaluation(
            beta_c=beta_c,
            freq_c_wins=result.freq_c_wins,
            freq_d_wins=result.freq_d_wins,
            seed=seed,
        )
        evaluations.append(ev)
        return ev

    at_lo = measure(lo)
    if not at_lo.freq_d_wins > tau:
        return CriticalBracket(
            beta_c_low=lo,
            beta_c_high=lo,
            evaluations=tuple(evaluations),
            lower_edge_exceeds_equal_rate_point=lo >= equal_rate_point,
            notes=(
                "degenerate: defectors never dominate at the lower endpoint, "
                "so the flip sits at or below it; " + finite_size_note
            ),
        )
    at_hi = measure(hi)
    if not at_hi.freq_c_wins > tau:
        raise BudgetExhausted(
            f"no cooperator-dominant point found at the upper endpoint {hi}",
            partial=CriticalBracket(
                beta_c_low=lo,
                beta_c_high=hi,
                evaluations=tuple(evaluations),
                lower_edge_exceeds_equal_rate_point=lo >= equal_rate_point,
                notes="upper endpoint never cooperator-dominant; " + finite_size_note,
            ),
        )

    low, high = lo, hi
    while len(evaluations) < budget:
        mid = 0.5 * (low + high)
        if measure(mid).freq_d_wins > tau:
            low = mid
        else:
            high = mid
    return CriticalBracket(
        beta_c_low=low,
        beta_c_high=high,
        evaluations=tuple(evaluations),
        lower_edge_exceeds_equal_rate_point=low >= equal_rate_point,
        notes=finite_size_note,
    )


def bracket_to_json(
    bracket: CriticalBracket,
    beta: float,
    beta_d: float,
    master_seed: int,
) -> str:
    """JSON document carrying the bracket plus everything needed to replay."""
    doc = {
        "beta": _fmt(beta),
        "beta_d": _fmt(beta_d),
        "master_seed": master_seed,
        "beta_c_low": _fmt(bracket.beta_c_low),
        "beta_c_high": _fmt(bracket.beta_c_high),
        "lower_edge_exceeds_equal_rate_point": bracket.lower_edge_exceeds_equal_rate_point,
        "notes": bracket.notes,
        "evaluations": [
            {
                "beta_c": _fmt(ev.beta_c),
                "freq_c_wins": _fmt(ev.freq_c_wins),
                "freq_d_wins": _fmt(ev.freq_d_wins),
                "seed": ev.seed,
            }
            for ev in bracket.evaluations
        ],
    }
    return json.dumps(doc, indent=2) + "\n"
