"""Consensus over weighted ballots: Borda, Copeland, Ranked Pairs, Kemeny.

Truncated-ballot semantics shared by every rule: the candidate pool is the
union of all ballot items; within one ballot, ranked items beat unranked
items; two unranked items are tied (contribute to neither side); for Borda,
each of a ballot's u unranked items receives the mean of the u lowest
position scores, preserving the ballot's total score mass.

Every tie anywhere resolves lexicographically by item id, and Ranked Pairs
orders equal margins by the (winner, loser) pair; resolutions are recorded
in the tiebreak trace so the consensus is auditable.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

from .errors import NoCandidates
from .model import (
    AggregateResult,
    PreferenceProfile,
    TieEvent,
    candidate_pool,
    kendall_tau,
)


class Rule(Enum):
    BORDA = "borda"
    COPELAND = "copeland"
    RANKED_PAIRS = "ranked_pairs"
    KEMENY = "kemeny"


@dataclass(frozen=True)
class RuleConfig:
    """Aggregation settings.

    ``kemeny_exact_limit`` caps the pool size for exhaustive Kemeny search;
    larger pools fall back to a Borda-seeded adjacent-swap hill climb with
    ``kemeny_search_iters`` total passes and seeded restarts.
    """

    rule: Rule = Rule.BORDA
    use_weights: bool = True
    kemeny_exact_limit: int = 8
    kemeny_search_iters: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kemeny_exact_limit < 2:
            raise ValueError("kemeny_exact_limit must be >= 2")
        if self.kemeny_search_iters < 1:
            raise ValueError("kemeny_search_iters must be >= 1")


@dataclass(frozen=True)
class PairwiseTally:
    """Weighted pairwise support: support[a][b] = weight preferring a over b."""

    pool: tuple[str, ...]
    support: Mapping[str, Mapping[str, float]]

    def margin(self, a: str, b: str) -> float:
        return self.support[a][b] - self.support[b][a]


def pairwise_tally(profile: PreferenceProfile, use_weights: bool = True) -> PairwiseTally:
    """Tally weighted pairwise preferences under truncation semantics.

    A ballot supports a over b when it ranks both with a higher, or ranks a
    and omits b.  Omitting both counts for neither side.
    """
    pool = profile.pool
    support: dict[str, dict[str, float]] = {a: {b: 0.0 for b in pool} for a in pool}
    for ballot in profile.ballots:
        w = ballot.weight if use_weights else 1.0
        if w == 0.0:
            continue
        pos = {item: i for i, item in enumerate(ballot.ranking)}
        for a in pool:
            pa = pos.get(a)
            if pa is None:
                continue
            for b in pool:
                if a == b:
                    continue
                pb = pos.get(b)
                if pb is None or pa < pb:
                    support[a][b] += w
    return PairwiseTally(pool=pool, support=support)


def _score_tie_events(totals: Mapping[str, float], label: str) -> tuple[TieEvent, ...]:
    by_score: dict[float, list[str]] = {}
    for item, score in totals.items():
        by_score.setdefault(score, []).append(item)
    events = []
    for score in sorted(by_score, reverse=True):
        group = sorted(by_score[score])
        if len(group) > 1:
            events.append(
                TieEvent(
                    description=f"{label} score tie at {score:.6f}: {', '.join(group)}",
                    resolution="id order",
                )
            )
    return tuple(events)


def _borda_totals(profile: PreferenceProfile, use_weights: bool) -> dict[str, float]:
    pool = profile.pool
    m = len(pool)
    totals = {item: 0.0 for item in pool}
    for ballot in profile.ballots:
        w = ballot.weight if use_weights else 1.0
        if w == 0.0:
            continue
        ranked = set(ballot.ranking)
        for i, item in enumerate(ballot.ranking):
            totals[item] += w * (m - 1 - i)
        u = m - len(ranked)
        if u > 0:
            # the u lowest scores are 0..u-1; their mean preserves score mass
            fill = (u - 1) / 2.0
            for item in pool:
                if item not in ranked:
                    totals[item] += w * fill
    return totals


def rule_borda(profile: PreferenceProfile, config: RuleConfig) -> AggregateResult:
    """Positional scoring: rank i from the top earns m-1-i points, weighted."""
    totals = _borda_totals(profile, config.use_weights)
    consensus = tuple(sorted(totals, key=lambda item: (-totals[item], item)))
    return AggregateResult(
        rule=Rule.BORDA.value,
        consensus=consensus,
        influence={},
        tiebreak_trace=_score_tie_events(totals, "borda"),
        scores=totals,
    )


def rule_copeland(profile: PreferenceProfile, config: RuleConfig) -> AggregateResult:
    """Pairwise-majority scoring: wins count 1, ties count 0.5."""
    tally = pairwise_tally(profile, config.use_weights)
    scores: dict[str, float] = {}
    for a in tally.pool:
        wins = ties = 0
        for b in tally.pool:
            if a == b:
                continue
            m = tally.margin(a, b)
            if m > 0:
                wins += 1
            elif m == 0:
                ties += 1
        scores[a] = wins + 0.5 * ties
    consensus = tuple(sorted(scores, key=lambda item: (-scores[item], item)))
    return AggregateResult(
        rule=Rule.COPELAND.value,
        consensus=consensus,
        influence={},
        tiebreak_trace=_score_tie_events(scores, "copeland"),
        scores=scores,
    )


def _reaches(adj: Mapping[str, set[str]], start: str, goal: str) -> bool:
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        for nxt in adj.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def rule_ranked_pairs(profile: PreferenceProfile, config: RuleConfig) -> AggregateResult:
    """Lock positive margins from largest down, skipping cycle-creating pairs.

    Equal margins lock in (winner, loser) pair order; the consensus is the
    topological order of the locked graph, smallest available id first.
    """
    tally = pairwise_tally(profile, config.use_weights)
    pool = tally.pool
    trace: list[TieEvent] = []

    positive: list[tuple[float, str, str]] = []
    for a in pool:
        for b in pool:
            if a >= b:
                continue
            m = tally.margin(a, b)
            if m > 0:
                positive.append((m, a, b))
            elif m < 0:
                positive.append((-m, b, a))
            else:
                trace.append(
                    TieEvent(
                        description=f"pairwise tie {a} vs {b}",
                        resolution="neither locked",
                    )
                )
    positive.sort(key=lambda t: (-t[0], t[1], t[2]))

    by_margin: dict[float, list[tuple[str, str]]] = {}
    for m, a, b in positive:
        by_margin.setdefault(m, []).append((a, b))
    for m in sorted(by_margin, reverse=True):
        group = by_margin[m]
        if len(group) > 1:
            pairs = ", ".join(f"{a}>{b}" for a, b in group)
            trace.append(
                TieEvent(
                    description=f"equal margin {m:.6f}: {pairs}",
                    resolution="locked in pair order",
                )
            )

    adj: dict[str, set[str]] = {item: set() for item in pool}
    for m, a, b in positive:
        if _reaches(adj, b, a):
            trace.append(
                TieEvent(
                    description=f"skipped {a}>{b} (margin {m:.6f}): would create cycle",
                    resolution="pair discarded",
                )
            )
            continue
        adj[a].add(b)

    indegree = {item: 0 for item in pool}
    for a in pool:
        for b in adj[a]:
            indegree[b] += 1
    consensus: list[str] = []
    available = sorted(item for item in pool if indegree[item] == 0)
    while available:
        node = available.pop(0)
        consensus.append(node)
        changed = False
        for b in sorted(adj[node]):
            indegree[b] -= 1
            if indegree[b] == 0:
                available.append(b)
                changed = True
        if changed:
            available.sort()

    scores = {item: float(len(adj[item])) for item in pool}
    return AggregateResult(
        rule=Rule.RANKED_PAIRS.value,
        consensus=tuple(consensus),
        influence={},
        tiebreak_trace=tuple(trace),
        scores=scores,
    )


def kemeny_distance(ranking: Sequence[str], tally: PairwiseTally) -> float:
    """Total weighted disagreement of a ranking with the tallied ballots.

    Each ordered pair (a before b) in the ranking costs the weight of ballots
    preferring b over a; this equals the weighted Kendall distance summed
    over ballots under truncation semantics.
    """
    support = tally.support
    total = 0.0
    for i, a in enumerate(ranking):
        for b in ranking[i + 1 :]:
            total += support[b][a]
    return total


def _kemeny_exact(
    pool: tuple[str, ...], tally: PairwiseTally
) -> tuple[tuple[str, ...], float, int]:
    best: tuple[str, ...] | None = None
    best_dist = float("inf")
    n_min = 0
    for perm in itertools.permutations(sorted(pool)):
        d = kemeny_distance(perm, tally)
        if d < best_dist:
            best = perm
            best_dist = d
            n_min = 1
        elif d == best_dist:
            n_min += 1
    assert best is not None
    return best, best_dist, n_min


def _climb(order: list[str], support: Mapping[str, Mapping[str, float]], budget: int) -> int:
    """Adjacent-swap hill climb in place; returns passes consumed."""
    used = 0
    improved = True
    while improved and used < budget:
        improved = False
        used += 1
        for i in range(len(order) - 1):
            a, b = order[i], order[i + 1]
            if support[a][b] < support[b][a]:
                order[i], order[i + 1] = b, a
                improved = True
    return used


def _kemeny_heuristic(
    profile: PreferenceProfile, config: RuleConfig, tally: PairwiseTally
) -> tuple[tuple[str, ...], float]:
    current = list(rule_borda(profile, config).consensus)
    rng = random.Random(config.seed)
    budget = config.kemeny_search_iters
    best: tuple[str, ...] | None = None
    best_dist = float("inf")
    while budget > 0:
        budget -= _climb(current, tally.support, budget)
        d = kemeny_distance(current, tally)
        key = tuple(current)
        if d < best_dist or (d == best_dist and best is not None and key < best):
            best = key
            best_dist = d
        if budget > 0:
            rng.shuffle(current)
    assert best is not None
    return best, best_dist


def rule_kemeny(profile: PreferenceProfile, config: RuleConfig) -> AggregateResult:
    """Kendall-distance minimization, exact up to the configured pool size.

    Exact search scans permutations in lexicographic order and keeps the
    first strict minimizer, so ties resolve to the lexicographically least
    optimum.  Larger pools use the seeded local search and are tagged
    "kemeny-heuristic" in the result.
    """
    tally = pairwise_tally(profile, config.use_weights)
    pool = tally.pool
    trace: list[TieEvent] = []
    if len(pool) <= config.kemeny_exact_limit:
        consensus, dist, n_min = _kemeny_exact(pool, tally)
        rule_name = Rule.KEMENY.value
        if n_min > 1:
            trace.append(
                TieEvent(
                    description=(
                        f"{n_min} permutations at minimum distance {dist:.6f}"
                    ),
                    resolution="lexicographically least selected",
                )
            )
    else:
        consensus, dist = _kemeny_heuristic(profile, config, tally)
        rule_name = Rule.KEMENY.value + "-heuristic"
    m = len(pool)
    scores = {item: float(m - 1 - i) for i, item in enumerate(consensus)}
    return AggregateResult(
        rule=rule_name,
        consensus=consensus,
        influence={},
        tiebreak_trace=tuple(trace),
        scores=scores,
    )


_RULES = {
    Rule.BORDA: rule_borda,
    Rule.COPELAND: rule_copeland,
    Rule.RANKED_PAIRS: rule_ranked_pairs,
    Rule.KEMENY: rule_kemeny,
}


def _run_rule(profile: PreferenceProfile, config: RuleConfig) -> AggregateResult:
    return _RULES[config.rule](profile, config)


def influence_loo(
    profile: PreferenceProfile, config: RuleConfig, consensus: Sequence[str]
) -> dict[str, float]:
    """Leave-one-out influence per agent, in [0, 1].

    Influence is the normalized Kendall distance between the consensus and
    the consensus recomputed without the agent's ballots, restricted to the
    surviving pool.  A single-agent profile gets 1.0 by convention; so does
    an agent whose removal empties the profile.
    """
    agents = sorted({b.agent_id for b in profile.ballots})
    if len(agents) == 1:
        return {agents[0]: 1.0}
    influence: dict[str, float] = {}
    for agent in agents:
        remaining = tuple(b for b in profile.ballots if b.agent_id != agent)
        try:
            sub_pool = candidate_pool(remaining)
        except (NoCandidates, ValueError):
            influence[agent] = 1.0
            continue
        # bare constructor: a leave-one-out profile may hold only
        # zero-weight ballots, which from_ballots rightly rejects
        sub_profile = PreferenceProfile(ballots=remaining, pool=sub_pool)
        sub_consensus = _run_rule(sub_profile, config).consensus
        common = set(sub_pool)
        restricted = tuple(item for item in consensus if item in common)
        _, normalized = kendall_tau(restricted, sub_consensus)
        influence[agent] = normalized
    return influence


def aggregate(profile: PreferenceProfile, config: RuleConfig) -> AggregateResult:
    """Run the configured rule and attach leave-one-out influence."""
    result = _run_rule(profile, config)
    return replace(result, influence=influence_loo(profile, config, result.consensus))
