"""A full multistakeholder run over the bundled tourism scenario.

Three agents (traveler relevance, provider parity, popularity mitigation)
vote on every query; the orchestrator grounds their ballots, tracks
reliability and fairness regret, and a dynamic policy may bench an agent
whose objective keeps being met anyway.
"""

from agorank import build_report, load_scenario, run_stream

scenario = load_scenario("builtin:tourism")
print(f"scenario {scenario.name}: {len(scenario.catalog)} items, "
      f"{len(scenario.agents)} agents, {len(scenario.queries)} queries")
print(f"rule: {scenario.rule_config.rule.value}, "
      f"activation: {scenario.policy.mode.value}")
print()

outcomes, ledger = run_stream(
    scenario.queries,
    scenario.agents,
    scenario.catalog,
    scenario.policy,
    scenario.rule_config,
)

for outcome in outcomes:
    print(f"{outcome.query_id}: {' > '.join(outcome.final_list)}")
    for ballot in outcome.per_agent_ballots:
        print(f"    {ballot.agent_id} (weight {ballot.weight:.2f}) voted "
              f"{list(ballot.ranking[:3])}...")
    for agent_id, reason in outcome.skipped_agents.items():
        print(f"    {agent_id} skipped: {reason}")
    regrets = ", ".join(
        f"{a}={r:.3f}" for a, r in sorted(outcome.per_agent_regret.items())
    )
    print(f"    regret: {regrets}")
print()

print("cumulative provider exposure:")
for provider, mass in sorted(ledger.exposure.as_mapping().items()):
    print(f"    {provider:<16} {mass:8.3f}")
print()

report = build_report(outcomes, scenario.agents, scenario.catalog)
print("battery aggregates (mean over computable queries):")
for metric, stats in sorted(report.aggregate.items()):
    print(f"    {metric:<22} {stats['mean']:8.4f}")
