"""Stakeholder agents: deterministic built-in candidate generators, the
external-service dispatch, and reliability bookkeeping.

Each agent produces a ranked ballot of catalog items toward one stakeholder
objective.  Built-ins are pure functions of (query, catalog, ledger), so a
given query always yields the same ballot.  Justifications are template text
carried through to reports untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from . import adapter
from .errors import AgorankError
from .metrics import METRIC_CODOMAIN, MetricId
from .model import Ballot, Catalog, Query, StakeholderRole


class AgentObjective(Enum):
    RELEVANCE = "relevance"
    PROVIDER_EXPOSURE = "provider_exposure"
    POPULARITY_MITIGATION = "popularity_mitigation"
    EXTERNAL = "external"


@dataclass(frozen=True)
class AgentSpec:
    """Static configuration of one stakeholder agent.

    ``objective_target`` is the agent's ideal value for its objective metric;
    fairness regret is measured against it.  ``compatibility_tags`` drive
    dynamic activation (empty set = compatible with every query).
    """

    agent_id: str
    role: StakeholderRole
    objective: AgentObjective
    objective_metric: MetricId
    objective_target: float
    params: Mapping[str, object] = field(default_factory=dict)
    compatibility_tags: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.agent_id:
            raise ValueError("agent_id must be non-empty")
        lo, hi = METRIC_CODOMAIN[self.objective_metric]
        if not lo <= self.objective_target <= hi:
            raise ValueError(
                f"agent {self.agent_id}: target {self.objective_target} outside "
                f"codomain [{lo}, {hi}] of {self.objective_metric.value}"
            )
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "compatibility_tags", frozenset(self.compatibility_tags))


@dataclass(frozen=True)
class AgentState:
    """Mutable-across-queries agent statistics, replaced on each update."""

    reliability_weight: float = 1.0
    cumulative_violations: int = 0
    queries_served: int = 0


class ExposureLedger:
    """Cumulative rank-discounted exposure per provider."""

    def __init__(self, counts: Mapping[str, float] | None = None):
        self._counts: dict[str, float] = dict(counts or {})

    def get(self, provider_id: str) -> float:
        return self._counts.get(provider_id, 0.0)

    def add(self, provider_id: str, credit: float) -> None:
        if credit < 0:
            raise ValueError("exposure credit must be >= 0")
        self._counts[provider_id] = self._counts.get(provider_id, 0.0) + credit

    def as_mapping(self) -> dict[str, float]:
        return dict(self._counts)


def generate_relevance(query: Query, catalog: Catalog, k: int) -> Ballot:
    """Personalization agent: preference-weight dot product, constraint-filtered.

    Items violating any query constraint are excluded; survivors are ranked
    by descending score (zero-score items retained), ties by id.  The ballot
    may be empty if every item is filtered out.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scored: list[tuple[float, str]] = []
    for item in catalog.items_sorted():
        if not all(c.satisfied_by(item) for c in query.constraints):
            continue
        score = sum(
            w for cat, w in query.preference_weights.items() if cat in item.categories
        )
        scored.append((score, item.id))
    scored.sort(key=lambda t: (-t[0], t[1]))
    ranking = tuple(item_id for _, item_id in scored[:k])
    if not ranking:
        justification = "all items violate the query constraints"
    else:
        top = catalog[ranking[0]]
        matched = sorted(
            c for c in top.categories if query.preference_weights.get(c, 0.0) > 0
        )
        if matched:
            justification = f"top pick {top.id} matches: {', '.join(matched)}"
        else:
            justification = f"top pick {top.id} matches no weighted category"
    return Ballot(agent_id="", ranking=ranking, justification=justification)


def generate_provider_exposure(
    query: Query, catalog: Catalog, ledger: ExposureLedger, k: int
) -> Ballot:
    """Provider-parity agent: least-exposed providers first.

    Items sort ascending by their provider's cumulative exposure (unseen
    providers count 0), ties by item id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(
        catalog.items_sorted(), key=lambda it: (ledger.get(it.provider_id), it.id)
    )
    ranking = tuple(item.id for item in ordered[:k])
    if ranking:
        top_provider = catalog.provider_of(ranking[0])
        justification = (
            f"promoting provider {top_provider} "
            f"(cumulative exposure {ledger.get(top_provider):.6f})"
        )
    else:
        justification = "catalog is empty"
    return Ballot(agent_id="", ranking=ranking, justification=justification)


def generate_popularity_mitigation(query: Query, catalog: Catalog, k: int) -> Ballot:
    """Popularity-bias counterweight: favor unpopular, sustainable items.

    score = (1 - popularity) + sustainability, descending, ties by id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = sorted(
        catalog.items_sorted(),
        key=lambda it: (-((1.0 - it.popularity) + it.sustainability), it.id),
    )
    ranking = tuple(item.id for item in scored[:k])
    if ranking:
        mean_pop = sum(catalog[i].popularity for i in ranking) / len(ranking)
        justification = f"mean popularity of slate: {mean_pop:.6f}"
    else:
        justification = "catalog is empty"
    return Ballot(agent_id="", ranking=ranking, justification=justification)


def update_reliability(
    state: AgentState,
    violations_this_query: int,
    items_this_query: int,
    lam: float = 0.5,
    w_min: float = 0.1,
) -> AgentState:
    """Multiplicative reliability decay with a floor.

    Violation rate r = violations/items (0 when the ballot was empty); the
    weight decays by factor (1 - lam*r), never below w_min.  Decay instead of
    exclusion keeps every stakeholder's voice non-zero.
    """
    if violations_this_query < 0 or items_this_query < violations_this_query:
        raise ValueError("need items >= violations >= 0")
    r = violations_this_query / items_this_query if items_this_query > 0 else 0.0
    weight = max(w_min, state.reliability_weight * (1.0 - lam * r))
    return AgentState(
        reliability_weight=weight,
        cumulative_violations=state.cumulative_violations + violations_this_query,
        queries_served=state.queries_served + 1,
    )


def generate_candidates(
    spec: AgentSpec,
    query: Query,
    catalog: Catalog,
    ledger: ExposureLedger,
    k: int,
    adapter_url: str | None = None,
) -> Ballot:
    """Produce one agent's raw ballot (not yet grounded), tagged with its id.

    External agents go over the adapter; their errors propagate for the
    orchestrator to handle.
    """
    if spec.objective is AgentObjective.RELEVANCE:
        ballot = generate_relevance(query, catalog, k)
    elif spec.objective is AgentObjective.PROVIDER_EXPOSURE:
        ballot = generate_provider_exposure(query, catalog, ledger, k)
    elif spec.objective is AgentObjective.POPULARITY_MITIGATION:
        ballot = generate_popularity_mitigation(query, catalog, k)
    elif spec.objective is AgentObjective.EXTERNAL:
        ballot = adapter.request_external(
            spec, query, catalog.items_sorted(), k, url_override=adapter_url
        )
    else:  # pragma: no cover
        raise AgorankError(f"unhandled objective {spec.objective}")
    return Ballot(
        agent_id=spec.agent_id,
        ranking=ballot.ranking,
        justification=ballot.justification,
        weight=ballot.weight,
    )
