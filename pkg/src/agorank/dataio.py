"""Catalog/interaction ingestion, scenario files, synthetic generation, and
report serialization.

Loaders reject structurally invalid input outright; row-level droppable
issues (interactions referencing unknown items) are counted and logged,
never silent.  All serialized artifacts use sorted keys and fixed 6-decimal
float formatting so identical runs produce byte-identical files.

The synthetic generator runs on a portable 64-bit linear congruential PRNG
(constants below, documented in FORMATS.md) rather than a stdlib generator,
so generated scenarios reproduce across implementations and platforms.
"""

from __future__ import annotations

import csv
import hashlib
import importlib.resources
import json
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

from .agents import AgentObjective, AgentSpec
from .aggregation import Rule, RuleConfig
from .errors import (
    DuplicateItemId,
    MalformedRecord,
    MissingRequiredField,
    SchemaError,
    UnknownMetricId,
    UnknownRule,
)
from .metrics import EvaluationReport, MetricId
from .model import (
    AggregateResult,
    Ballot,
    Catalog,
    Constraint,
    Item,
    Query,
    StakeholderRole,
    TieEvent,
)
from .orchestrator import ActivationMode, ActivationPolicy, QueryOutcome

log = logging.getLogger("agorank")

CATALOG_CSV_FIELDS = ("id", "provider_id", "categories", "popularity", "sustainability", "description")
INTERACTION_CSV_FIELDS = ("user_id", "item_id", "rating", "timestamp")

# 64-bit LCG (MMIX constants); uniform takes the top 53 bits
LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407
_MASK64 = (1 << 64) - 1
CATALOG_SEED_GAMMA = 0x9E3779B97F4A7C15

DEFAULT_CATEGORIES = ("art", "beach", "culture", "food", "market", "museum", "nature", "trail")


class PortableRng:
    """Deterministic cross-platform PRNG for synthetic data.

    state' = state * LCG_MULT + LCG_INC (mod 2^64); uniform() returns the top
    53 bits of the new state divided by 2^53, i.e. a float in [0, 1).
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state * LCG_MULT + LCG_INC) & _MASK64
        return self.state

    def uniform(self) -> float:
        return (self.next_u64() >> 11) / float(1 << 53)


@dataclass(frozen=True)
class PersonaParams:
    """Generator template for one synthetic persona's query stream."""

    persona_text: str
    category_weights: Mapping[str, float]
    constraint_templates: tuple[Constraint, ...] = ()
    query_count: int = 1
    top_n: int = 5

    def __post_init__(self):
        if self.query_count < 1:
            raise ValueError("query_count must be >= 1")
        object.__setattr__(self, "category_weights", dict(self.category_weights))
        object.__setattr__(self, "constraint_templates", tuple(self.constraint_templates))


@dataclass(frozen=True)
class Scenario:
    """A fully resolved run configuration: catalog, agents, policy, queries."""

    name: str
    catalog_source: str
    catalog: Catalog
    agents: tuple[AgentSpec, ...]
    policy: ActivationPolicy
    rule_config: RuleConfig
    queries: tuple[Query, ...]
    seed: int


def _parse_unit_float(raw: str, field: str, line: int) -> float:
    if raw is None or raw == "":
        return 0.5
    try:
        return float(raw)
    except ValueError as exc:
        raise MalformedRecord(f"{field} {raw!r} is not a number", line) from exc


def load_catalog(path: str | Path) -> Catalog:
    """Load a catalog from CSV or JSON (picked by file suffix).

    CSV columns: id, provider_id, categories (';'-separated), popularity,
    sustainability, description.  Missing popularity/sustainability default
    to 0.5.  The JSON form is a list of item objects and may also carry an
    "attributes" map.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _load_catalog_json(path)
    return _load_catalog_csv(path)


def _load_catalog_csv(path: Path) -> Catalog:
    items: list[Item] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MalformedRecord("empty catalog file", 1)
        missing_cols = {"id", "provider_id"} - set(reader.fieldnames)
        if missing_cols:
            raise MalformedRecord(
                f"missing columns: {', '.join(sorted(missing_cols))}", 1
            )
        for line, row in enumerate(reader, start=2):
            if row.get("id") in (None, ""):
                raise MissingRequiredField(f"line {line}: missing id")
            if row.get("provider_id") in (None, ""):
                raise MissingRequiredField(f"line {line}: missing provider_id")
            raw_cats = row.get("categories") or ""
            categories = frozenset(c.strip() for c in raw_cats.split(";") if c.strip())
            try:
                item = Item(
                    id=row["id"],
                    provider_id=row["provider_id"],
                    categories=categories,
                    popularity=_parse_unit_float(row.get("popularity"), "popularity", line),
                    sustainability=_parse_unit_float(
                        row.get("sustainability"), "sustainability", line
                    ),
                    description=row.get("description") or "",
                )
            except ValueError as exc:
                raise MalformedRecord(str(exc), line) from exc
            items.append(item)
    return Catalog(items)


def _load_catalog_json(path: Path) -> Catalog:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except ValueError as exc:
            raise MalformedRecord(f"invalid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise MalformedRecord("catalog JSON must be a list of items")
    items: list[Item] = []
    for i, rec in enumerate(payload):
        if not isinstance(rec, dict):
            raise MalformedRecord(f"item {i} is not an object")
        if not rec.get("id"):
            raise MissingRequiredField(f"item {i}: missing id")
        if not rec.get("provider_id"):
            raise MissingRequiredField(f"item {i}: missing provider_id")
        try:
            items.append(
                Item(
                    id=rec["id"],
                    provider_id=rec["provider_id"],
                    categories=frozenset(rec.get("categories", ())),
                    popularity=float(rec.get("popularity", 0.5)),
                    sustainability=float(rec.get("sustainability", 0.5)),
                    attributes={
                        k: float(v) for k, v in (rec.get("attributes") or {}).items()
                    },
                    description=rec.get("description", ""),
                )
            )
        except (TypeError, ValueError) as exc:
            raise MalformedRecord(f"item {i}: {exc}") from exc
    return Catalog(items)


def export_catalog(catalog: Catalog, path: str | Path) -> None:
    """Write a catalog back out (CSV or JSON by suffix); loaders round-trip it."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        records = []
        for item in catalog.items_sorted():
            records.append(
                {
                    "id": item.id,
                    "provider_id": item.provider_id,
                    "categories": sorted(item.categories),
                    "popularity": item.popularity,
                    "sustainability": item.sustainability,
                    "attributes": dict(sorted(item.attributes.items())),
                    "description": item.description,
                }
            )
        path.write_text(json.dumps(records, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CATALOG_CSV_FIELDS)
        for item in catalog.items_sorted():
            writer.writerow(
                [
                    item.id,
                    item.provider_id,
                    ";".join(sorted(item.categories)),
                    repr(item.popularity),
                    repr(item.sustainability),
                    item.description,
                ]
            )


def load_interactions(
    path: str | Path, catalog: Catalog
) -> dict[str, list[tuple[str, float, str]]]:
    """Load user interactions, dropping rows that reference unknown items.

    CSV columns: user_id, item_id, rating, timestamp (ISO-8601).  Dropped
    rows are counted and logged.  Per-user lists come back sorted by
    timestamp.
    """
    per_user: dict[str, list[tuple[datetime, str, float, str]]] = {}
    dropped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return {}
        for line, row in enumerate(reader, start=2):
            user = row.get("user_id")
            item = row.get("item_id")
            if not user or not item:
                raise MalformedRecord("missing user_id or item_id", line)
            try:
                rating = float(row.get("rating", ""))
            except ValueError as exc:
                raise MalformedRecord(f"rating {row.get('rating')!r} is not a number", line) from exc
            raw_ts = row.get("timestamp") or ""
            try:
                ts = datetime.fromisoformat(raw_ts)
            except ValueError as exc:
                raise MalformedRecord(f"timestamp {raw_ts!r} is not ISO-8601", line) from exc
            if item not in catalog:
                dropped += 1
                continue
            per_user.setdefault(user, []).append((ts, item, rating, raw_ts))
    if dropped:
        log.warning("dropped %d interaction rows referencing unknown items", dropped)
    result: dict[str, list[tuple[str, float, str]]] = {}
    for user in sorted(per_user):
        rows = sorted(per_user[user], key=lambda r: (r[0], r[1]))
        result[user] = [(item, rating, raw_ts) for _, item, rating, raw_ts in rows]
    return result


def generate_catalog(
    item_count: int = 200,
    provider_count: int = 20,
    categories: Sequence[str] = DEFAULT_CATEGORIES,
    seed: int = 0,
) -> Catalog:
    """Deterministic synthetic catalog.

    Providers are assigned round-robin.  Popularity is a squared uniform
    draw (few popular items, long unpopular tail); sustainability is
    uniform.  Per-item draw order: popularity, sustainability, first
    category, second-category gate (p=0.4), second category if gated in,
    price.
    """
    if item_count < 1 or provider_count < 1 or not categories:
        raise ValueError("need item_count >= 1, provider_count >= 1, categories non-empty")
    rng = PortableRng(seed ^ CATALOG_SEED_GAMMA)
    cats = list(categories)
    items: list[Item] = []
    for i in range(item_count):
        popularity = round(rng.uniform() ** 2, 6)
        sustainability = round(rng.uniform(), 6)
        chosen = {cats[int(rng.uniform() * len(cats)) % len(cats)]}
        if rng.uniform() < 0.4:
            chosen.add(cats[int(rng.uniform() * len(cats)) % len(cats)])
        price = round(20.0 + 180.0 * rng.uniform(), 2)
        items.append(
            Item(
                id=f"item-{i:03d}",
                provider_id=f"provider-{i % provider_count:02d}",
                categories=frozenset(chosen),
                popularity=popularity,
                sustainability=sustainability,
                attributes={"price": price},
                description=f"synthetic item {i}: {', '.join(sorted(chosen))}",
            )
        )
    return Catalog(items)


def generate_synthetic(
    personas: Sequence[PersonaParams], catalog: Catalog, seed: int
) -> list[Query]:
    """Deterministic persona-driven query stream.

    One shared PRNG stream, consumed in a fixed order: personas in list
    order, queries 0..count-1, per query one noise draw per category (sorted
    by name) then one inclusion draw per constraint template (list order).
    Weight noise is uniform in [-0.1, 0.1], clamped at 0.
    """
    if len(catalog) == 0:
        raise ValueError("catalog must be non-empty")
    rng = PortableRng(seed)
    queries: list[Query] = []
    for p_idx, persona in enumerate(personas):
        for q_idx in range(persona.query_count):
            weights: dict[str, float] = {}
            for cat in sorted(persona.category_weights):
                noise = -0.1 + 0.2 * rng.uniform()
                weights[cat] = max(0.0, persona.category_weights[cat] + noise)
            constraints = tuple(
                tpl for tpl in persona.constraint_templates if rng.uniform() < 0.5
            )
            queries.append(
                Query(
                    id=f"{p_idx}-{q_idx}",
                    text=f"{persona.persona_text} (request {q_idx})",
                    preference_weights=weights,
                    constraints=constraints,
                    user_history=(),
                    top_n=persona.top_n,
                )
            )
    return queries


# ---------------------------------------------------------------------------
# scenario files


def _expect_dict(v: object, path: str) -> dict:
    if not isinstance(v, dict):
        raise SchemaError(f"{path}: expected an object")
    return v


def _expect_list(v: object, path: str) -> list:
    if not isinstance(v, list):
        raise SchemaError(f"{path}: expected a list")
    return v


def _expect_str(v: object, path: str) -> str:
    if not isinstance(v, str):
        raise SchemaError(f"{path}: expected a string")
    return v


def _expect_number(v: object, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}: expected a number")
    return float(v)


def _expect_int(v: object, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{path}: expected an integer")
    return v


def _parse_constraint(raw: object, path: str) -> Constraint:
    obj = _expect_dict(raw, path)
    attribute = _expect_str(obj.get("attribute"), f"{path}.attribute")
    direction = _expect_str(obj.get("direction"), f"{path}.direction")
    value = _expect_number(obj.get("value"), f"{path}.value")
    try:
        return Constraint(attribute=attribute, direction=direction, value=value)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _parse_agent(raw: object, path: str) -> AgentSpec:
    obj = _expect_dict(raw, path)
    agent_id = _expect_str(obj.get("agent_id"), f"{path}.agent_id")
    role_raw = _expect_str(obj.get("role"), f"{path}.role")
    try:
        role = StakeholderRole(role_raw)
    except ValueError:
        raise SchemaError(f"{path}.role: unknown role {role_raw!r}") from None
    objective_raw = _expect_str(obj.get("objective"), f"{path}.objective")
    try:
        objective = AgentObjective(objective_raw)
    except ValueError:
        raise SchemaError(f"{path}.objective: unknown objective {objective_raw!r}") from None
    metric_raw = _expect_str(obj.get("objective_metric"), f"{path}.objective_metric")
    try:
        metric = MetricId(metric_raw)
    except ValueError:
        raise UnknownMetricId(f"{path}.objective_metric: {metric_raw!r}") from None
    target = _expect_number(obj.get("objective_target"), f"{path}.objective_target")
    params_raw = obj.get("params", {})
    params = _expect_dict(params_raw, f"{path}.params") if params_raw else {}
    tags_raw = obj.get("compatibility_tags", [])
    tags = [
        _expect_str(t, f"{path}.compatibility_tags[{i}]")
        for i, t in enumerate(_expect_list(tags_raw, f"{path}.compatibility_tags"))
    ]
    try:
        return AgentSpec(
            agent_id=agent_id,
            role=role,
            objective=objective,
            objective_metric=metric,
            objective_target=target,
            params=params,
            compatibility_tags=frozenset(tags),
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _parse_policy(raw: object, path: str) -> ActivationPolicy:
    if raw is None:
        return ActivationPolicy()
    obj = _expect_dict(raw, path)
    mode_raw = obj.get("mode", "static")
    mode_str = _expect_str(mode_raw, f"{path}.mode")
    try:
        mode = ActivationMode(mode_str)
    except ValueError:
        raise SchemaError(f"{path}.mode: unknown mode {mode_str!r}") from None
    kwargs: dict[str, object] = {"mode": mode}
    if "fairness_threshold" in obj:
        kwargs["fairness_threshold"] = _expect_number(
            obj["fairness_threshold"], f"{path}.fairness_threshold"
        )
    if "window" in obj:
        kwargs["window"] = _expect_int(obj["window"], f"{path}.window")
    if "compatibility_min" in obj:
        kwargs["compatibility_min"] = _expect_number(
            obj["compatibility_min"], f"{path}.compatibility_min"
        )
    try:
        return ActivationPolicy(**kwargs)  # type: ignore[arg-type]
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def parse_rule_name(name: str) -> Rule:
    try:
        return Rule(name)
    except ValueError:
        raise UnknownRule(f"unknown rule {name!r}") from None


def _parse_rule(raw: object, path: str, default_seed: int) -> RuleConfig:
    if raw is None:
        return RuleConfig(seed=default_seed)
    if isinstance(raw, str):
        return RuleConfig(rule=parse_rule_name(raw), seed=default_seed)
    obj = _expect_dict(raw, path)
    name = _expect_str(obj.get("name"), f"{path}.name")
    rule = parse_rule_name(name)
    kwargs: dict[str, object] = {"rule": rule, "seed": default_seed}
    if "use_weights" in obj:
        if not isinstance(obj["use_weights"], bool):
            raise SchemaError(f"{path}.use_weights: expected a boolean")
        kwargs["use_weights"] = obj["use_weights"]
    if "kemeny_exact_limit" in obj:
        kwargs["kemeny_exact_limit"] = _expect_int(
            obj["kemeny_exact_limit"], f"{path}.kemeny_exact_limit"
        )
    if "kemeny_search_iters" in obj:
        kwargs["kemeny_search_iters"] = _expect_int(
            obj["kemeny_search_iters"], f"{path}.kemeny_search_iters"
        )
    if "seed" in obj:
        kwargs["seed"] = _expect_int(obj["seed"], f"{path}.seed")
    try:
        return RuleConfig(**kwargs)  # type: ignore[arg-type]
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _parse_query(raw: object, path: str, catalog: Catalog) -> Query:
    obj = _expect_dict(raw, path)
    qid = _expect_str(obj.get("id"), f"{path}.id")
    text = _expect_str(obj.get("text", ""), f"{path}.text")
    weights_raw = _expect_dict(obj.get("preference_weights", {}), f"{path}.preference_weights")
    weights = {
        _expect_str(k, f"{path}.preference_weights key"): _expect_number(
            v, f"{path}.preference_weights.{k}"
        )
        for k, v in weights_raw.items()
    }
    constraints = tuple(
        _parse_constraint(c, f"{path}.constraints[{i}]")
        for i, c in enumerate(_expect_list(obj.get("constraints", []), f"{path}.constraints"))
    )
    history_raw = _expect_list(obj.get("user_history", []), f"{path}.user_history")
    history = []
    for i, h in enumerate(history_raw):
        item_id = _expect_str(h, f"{path}.user_history[{i}]")
        if item_id not in catalog:
            raise SchemaError(f"{path}.user_history[{i}]: unknown item {item_id!r}")
        history.append(item_id)
    top_n = obj.get("top_n", 5)
    try:
        return Query(
            id=qid,
            text=text,
            preference_weights=weights,
            constraints=constraints,
            user_history=tuple(history),
            top_n=_expect_int(top_n, f"{path}.top_n"),
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _parse_persona(raw: object, path: str) -> PersonaParams:
    obj = _expect_dict(raw, path)
    text = _expect_str(obj.get("persona_text"), f"{path}.persona_text")
    weights_raw = _expect_dict(obj.get("category_weights"), f"{path}.category_weights")
    weights = {
        _expect_str(k, f"{path}.category_weights key"): _expect_number(
            v, f"{path}.category_weights.{k}"
        )
        for k, v in weights_raw.items()
    }
    templates = tuple(
        _parse_constraint(c, f"{path}.constraint_templates[{i}]")
        for i, c in enumerate(
            _expect_list(obj.get("constraint_templates", []), f"{path}.constraint_templates")
        )
    )
    count = _expect_int(obj.get("query_count"), f"{path}.query_count")
    top_n = _expect_int(obj.get("top_n", 5), f"{path}.top_n")
    try:
        return PersonaParams(
            persona_text=text,
            category_weights=weights,
            constraint_templates=templates,
            query_count=count,
            top_n=top_n,
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def builtin_scenario_path(alias: str) -> Path:
    """Resolve a "builtin:<name>" alias to the bundled scenario file."""
    name = alias.split(":", 1)[1]
    mapping = {
        "tourism": ("tourism", "scenario.json"),
        "synthetic-200": ("synthetic", "scenario_200.json"),
    }
    if name not in mapping:
        raise SchemaError(
            f"unknown builtin scenario {name!r}; available: {', '.join(sorted(mapping))}"
        )
    sub, fname = mapping[name]
    root = importlib.resources.files("agorank")
    return Path(str(root / "data" / sub / fname))


def load_scenario(path: str | Path, seed_override: int | None = None) -> Scenario:
    """Load and fully validate a scenario file.

    Top-level keys: name, catalog, agents, policy, rule, queries | personas,
    seed.  The catalog entry is a file path (relative to the scenario file),
    or {"synthetic": {...}} generator parameters.  "builtin:<name>" aliases
    resolve to bundled scenarios.  ``seed_override`` replaces the file's seed
    before anything (catalog, queries, rule) derives from it.
    """
    if isinstance(path, str) and path.startswith("builtin:"):
        path = builtin_scenario_path(path)
    path = Path(path)
    try:
        raw_text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read scenario file: {exc}") from exc
    try:
        doc = json.loads(raw_text)
    except ValueError as exc:
        raise SchemaError(f"scenario is not valid JSON: {exc}") from exc
    doc = _expect_dict(doc, "scenario")

    name = _expect_str(doc.get("name"), "name")
    seed = _expect_int(doc.get("seed", 0), "seed")
    if seed_override is not None:
        seed = seed_override

    catalog_raw = doc.get("catalog")
    if isinstance(catalog_raw, str):
        catalog_path = (path.parent / catalog_raw).resolve()
        try:
            catalog = load_catalog(catalog_path)
        except OSError as exc:
            raise SchemaError(f"catalog: cannot read {catalog_raw!r}: {exc}") from exc
        catalog_source = catalog_raw
    elif isinstance(catalog_raw, dict):
        params = _expect_dict(catalog_raw.get("synthetic"), "catalog.synthetic")
        item_count = _expect_int(params.get("item_count", 200), "catalog.synthetic.item_count")
        provider_count = _expect_int(
            params.get("provider_count", 20), "catalog.synthetic.provider_count"
        )
        cats_raw = _expect_list(
            params.get("categories", list(DEFAULT_CATEGORIES)), "catalog.synthetic.categories"
        )
        cats = [
            _expect_str(c, f"catalog.synthetic.categories[{i}]") for i, c in enumerate(cats_raw)
        ]
        try:
            catalog = generate_catalog(item_count, provider_count, cats, seed)
        except ValueError as exc:
            raise SchemaError(f"catalog.synthetic: {exc}") from exc
        catalog_source = "synthetic"
    else:
        raise SchemaError("catalog: expected a file path or {'synthetic': {...}}")

    agents_raw = _expect_list(doc.get("agents"), "agents")
    if not agents_raw:
        raise SchemaError("agents: at least one agent is required")
    agents = tuple(_parse_agent(a, f"agents[{i}]") for i, a in enumerate(agents_raw))
    ids = [a.agent_id for a in agents]
    if len(set(ids)) != len(ids):
        raise SchemaError("agents: duplicate agent_id")

    policy = _parse_policy(doc.get("policy"), "policy")
    rule_config = _parse_rule(doc.get("rule"), "rule", seed)

    has_queries = "queries" in doc
    has_personas = "personas" in doc
    if has_queries == has_personas:
        raise SchemaError("exactly one of 'queries' or 'personas' is required")
    if has_queries:
        queries_raw = _expect_list(doc.get("queries"), "queries")
        if not queries_raw:
            raise SchemaError("queries: at least one query is required")
        queries = tuple(
            _parse_query(q, f"queries[{i}]", catalog) for i, q in enumerate(queries_raw)
        )
    else:
        personas_raw = _expect_list(doc.get("personas"), "personas")
        if not personas_raw:
            raise SchemaError("personas: at least one persona is required")
        personas = [
            _parse_persona(p, f"personas[{i}]") for i, p in enumerate(personas_raw)
        ]
        queries = tuple(generate_synthetic(personas, catalog, seed))

    return Scenario(
        name=name,
        catalog_source=catalog_source,
        catalog=catalog,
        agents=agents,
        policy=policy,
        rule_config=rule_config,
        queries=queries,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# report serialization


def _round6(value: object) -> object:
    if isinstance(value, float):
        r = round(value, 6)
        return 0.0 if r == 0 else r
    if isinstance(value, dict):
        return {k: _round6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round6(v) for v in value]
    return value


def _fmt6(value: float | None) -> str:
    if value is None:
        return ""
    r = round(value, 6)
    if r == 0:
        r = 0.0
    return f"{r:.6f}"


def _report_payload(
    runs: Mapping[str, tuple[EvaluationReport, Sequence[QueryOutcome]]],
    scenario_name: str,
) -> dict:
    rules_obj: dict[str, object] = {}
    for rule_name in sorted(runs):
        report, outcomes = runs[rule_name]
        by_query = {o.query_id: o for o in outcomes}
        per_query = []
        for entry in report.per_query:
            outcome = by_query[entry.query_id]
            per_query.append(
                {
                    "query_id": entry.query_id,
                    "rule": outcome.aggregate.rule,
                    "final_list": list(outcome.final_list),
                    "values": dict(entry.values),
                    "regret": dict(entry.regret),
                    "influence": dict(entry.influence),
                    "skipped_agents": dict(outcome.skipped_agents),
                }
            )
        rules_obj[rule_name] = {
            "aggregate": {k: dict(v) for k, v in report.aggregate.items()},
            "drift": {k: list(v) for k, v in report.drift.items()},
            "runtime_calls": dict(report.runtime),
            "per_query": per_query,
        }
    return {"scenario": scenario_name, "rules": rules_obj}


def _write_metrics_csv(
    runs: Mapping[str, tuple[EvaluationReport, Sequence[QueryOutcome]]], path: Path
) -> None:
    agent_ids = sorted(
        {a for report, _ in runs.values() for a in report.drift}
    )
    metric_cols = [m.value for m in MetricId]
    header = (
        ["rule", "query_index", "query_id"]
        + metric_cols
        + [f"regret:{a}" for a in agent_ids]
        + [f"influence:{a}" for a in agent_ids]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rule_name in sorted(runs):
            report, _ = runs[rule_name]
            for idx, entry in enumerate(report.per_query):
                row = [rule_name, str(idx), entry.query_id]
                row += [_fmt6(entry.values.get(m)) for m in metric_cols]
                row += [_fmt6(entry.regret.get(a)) for a in agent_ids]
                row += [_fmt6(entry.influence.get(a)) for a in agent_ids]
                writer.writerow(row)


def _write_summary_md(
    runs: Mapping[str, tuple[EvaluationReport, Sequence[QueryOutcome]]],
    scenario_name: str,
    path: Path,
) -> None:
    lines: list[str] = [f"# Run summary: {scenario_name}", ""]
    for rule_name in sorted(runs):
        report, outcomes = runs[rule_name]
        lines += [f"## Rule: {rule_name}", ""]
        lines += ["| metric | mean | min | max |", "| --- | --- | --- | --- |"]
        for metric in MetricId:
            agg = report.aggregate.get(metric.value)
            if agg is None:
                continue
            lines.append(
                f"| {metric.value} | {_fmt6(agg['mean'])} | {_fmt6(agg['min'])} "
                f"| {_fmt6(agg['max'])} |"
            )
        lines.append("")
        agent_ids = sorted(report.drift)
        lines += [
            "| agent | mean regret | mean influence |",
            "| --- | --- | --- |",
        ]
        n_q = len(report.per_query)
        for agent in agent_ids:
            mean_regret = sum(report.drift[agent]) / n_q if n_q else 0.0
            influences = [q.influence.get(agent) for q in report.per_query]
            known = [v for v in influences if v is not None]
            mean_influence = sum(known) / len(known) if known else 0.0
            lines.append(f"| {agent} | {_fmt6(mean_regret)} | {_fmt6(mean_influence)} |")
        lines.append("")
        lines += ["### Regret drift (per query)", ""]
        for agent in agent_ids:
            series = " ".join(_fmt6(v) for v in report.drift[agent])
            lines.append(f"- {agent}: {series}")
        lines.append("")
        skipped_total = sum(len(o.skipped_agents) for o in outcomes)
        lines.append(f"Queries: {n_q}; agent skips/drops: {skipped_total}")
        lines.append("")
        lines += ["| stage | calls |", "| --- | --- |"]
        for stage in sorted(report.runtime):
            lines.append(f"| {stage} | {report.runtime[stage]} |")
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")


def write_report(
    runs: Mapping[str, tuple[EvaluationReport, Sequence[QueryOutcome]]],
    path_prefix: str | Path,
    scenario_name: str,
) -> list[Path]:
    """Write PREFIX.report.json, PREFIX.metrics.csv, and PREFIX.summary.md.

    ``runs`` maps a rule label to its (report, outcomes) pair; the compare
    command passes several, run passes one.  Identical runs produce
    byte-identical files.
    """
    prefix = Path(path_prefix)
    if prefix.parent != Path(".") :
        prefix.parent.mkdir(parents=True, exist_ok=True)
    json_path = prefix.with_name(prefix.name + ".report.json")
    csv_path = prefix.with_name(prefix.name + ".metrics.csv")
    md_path = prefix.with_name(prefix.name + ".summary.md")
    payload = _round6(_report_payload(runs, scenario_name))
    json_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_metrics_csv(runs, csv_path)
    _write_summary_md(runs, scenario_name, md_path)
    return [json_path, csv_path, md_path]


# ---------------------------------------------------------------------------
# saved outcomes


def catalog_hash(catalog: Catalog) -> str:
    """Content hash of a catalog, for pinning outcomes to their data."""
    records = []
    for item in catalog.items_sorted():
        records.append(
            {
                "id": item.id,
                "provider_id": item.provider_id,
                "categories": sorted(item.categories),
                "popularity": item.popularity,
                "sustainability": item.sustainability,
                "attributes": dict(sorted(item.attributes.items())),
                "description": item.description,
            }
        )
    blob = json.dumps(records, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _query_to_obj(query: Query) -> dict:
    return {
        "id": query.id,
        "text": query.text,
        "preference_weights": dict(query.preference_weights),
        "constraints": [
            {"attribute": c.attribute, "direction": c.direction, "value": c.value}
            for c in query.constraints
        ],
        "user_history": list(query.user_history),
        "top_n": query.top_n,
    }


def _outcome_to_obj(outcome: QueryOutcome) -> dict:
    return {
        "query": _query_to_obj(outcome.query),
        "final_list": list(outcome.final_list),
        "ballots": [
            {
                "agent_id": b.agent_id,
                "ranking": list(b.ranking),
                "justification": b.justification,
                "weight": b.weight,
            }
            for b in outcome.per_agent_ballots
        ],
        "aggregate": {
            "rule": outcome.aggregate.rule,
            "consensus": list(outcome.aggregate.consensus),
            "influence": dict(outcome.aggregate.influence),
            "tiebreak_trace": [
                {"description": e.description, "resolution": e.resolution}
                for e in outcome.aggregate.tiebreak_trace
            ],
            "scores": dict(outcome.aggregate.scores),
        },
        "skipped_agents": dict(outcome.skipped_agents),
        "justifications": dict(outcome.justifications),
        "per_agent_achieved": dict(outcome.per_agent_achieved),
        "per_agent_regret": dict(outcome.per_agent_regret),
        "stage_calls": dict(outcome.stage_calls),
    }


def save_outcomes(
    outcomes: Sequence[QueryOutcome],
    catalog: Catalog,
    path: str | Path,
    scenario_name: str,
    rule_name: str,
) -> None:
    """Persist per-query outcomes with a catalog content hash.

    Floats keep full precision here (unlike reports) so an evaluate-only
    replay reproduces the original report byte for byte.
    """
    payload = {
        "scenario": scenario_name,
        "rule": rule_name,
        "catalog_hash": catalog_hash(catalog),
        "outcomes": [_outcome_to_obj(o) for o in outcomes],
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _obj_to_query(obj: dict) -> Query:
    return Query(
        id=obj["id"],
        text=obj.get("text", ""),
        preference_weights=obj.get("preference_weights", {}),
        constraints=tuple(
            Constraint(c["attribute"], c["direction"], c["value"])
            for c in obj.get("constraints", [])
        ),
        user_history=tuple(obj.get("user_history", [])),
        top_n=obj.get("top_n", 5),
    )


def load_outcomes(
    path: str | Path, catalog: Catalog
) -> tuple[list[QueryOutcome], str, str]:
    """Load saved outcomes, checking the catalog hash.

    Returns (outcomes, scenario_name, rule_name).

    Raises:
        SchemaError: unreadable/invalid file, or catalog hash mismatch.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read outcomes file: {exc}") from exc
    except ValueError as exc:
        raise SchemaError(f"outcomes file is not valid JSON: {exc}") from exc
    try:
        expected = doc["catalog_hash"]
        actual = catalog_hash(catalog)
        if expected != actual:
            raise SchemaError(
                "catalog hash mismatch: outcomes were recorded against a "
                f"different catalog (recorded {expected[:12]}…, current {actual[:12]}…)"
            )
        outcomes = []
        for obj in doc["outcomes"]:
            agg = obj["aggregate"]
            outcomes.append(
                QueryOutcome(
                    query_id=obj["query"]["id"],
                    final_list=tuple(obj["final_list"]),
                    per_agent_ballots=tuple(
                        Ballot(
                            agent_id=b["agent_id"],
                            ranking=tuple(b["ranking"]),
                            justification=b.get("justification"),
                            weight=b["weight"],
                        )
                        for b in obj["ballots"]
                    ),
                    aggregate=AggregateResult(
                        rule=agg["rule"],
                        consensus=tuple(agg["consensus"]),
                        influence=dict(agg["influence"]),
                        tiebreak_trace=tuple(
                            TieEvent(e["description"], e["resolution"])
                            for e in agg.get("tiebreak_trace", [])
                        ),
                        scores=dict(agg.get("scores", {})),
                    ),
                    skipped_agents=dict(obj.get("skipped_agents", {})),
                    justifications=dict(obj.get("justifications", {})),
                    query=_obj_to_query(obj["query"]),
                    per_agent_achieved=dict(obj.get("per_agent_achieved", {})),
                    per_agent_regret=dict(obj.get("per_agent_regret", {})),
                    stage_calls=dict(obj.get("stage_calls", {})),
                    stage_seconds={},
                )
            )
        return outcomes, doc.get("scenario", ""), doc.get("rule", "")
    except SchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"outcomes file is malformed: {exc}") from exc
