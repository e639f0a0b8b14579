import json
import subprocess
import sys

import pytest


def agorank(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "agorank", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
        timeout=120,
    )


class TestRun:
    def test_tourism_run(self, tmp_path):
        out = tmp_path / "rep"
        proc = agorank("run", "--scenario", "builtin:tourism", "--out", str(out))
        assert proc.returncode == 0
        assert "scenario tourism: 4 queries" in proc.stdout
        assert (tmp_path / "rep.report.json").exists()
        assert (tmp_path / "rep.metrics.csv").exists()
        assert (tmp_path / "rep.summary.md").exists()

    def test_stdout_summary_stderr_logs(self, tmp_path):
        proc = agorank(
            "run", "--scenario", "builtin:tourism", "--out", str(tmp_path / "rep")
        )
        # per-query progress goes to stderr, leaving stdout parseable
        assert "INFO" not in proc.stdout
        assert "query q1" in proc.stderr
        assert "wrote" in proc.stdout

    def test_rule_override(self, tmp_path):
        out = tmp_path / "rep"
        proc = agorank(
            "run", "--scenario", "builtin:tourism", "--out", str(out),
            "--rule", "copeland",
        )
        assert proc.returncode == 0
        payload = json.loads((tmp_path / "rep.report.json").read_text())
        assert list(payload["rules"]) == ["copeland"]

    def test_unknown_rule_is_bad_input(self, tmp_path):
        proc = agorank(
            "run", "--scenario", "builtin:tourism", "--out", str(tmp_path / "rep"),
            "--rule", "plurality",
        )
        assert proc.returncode == 2
        assert "error:" in proc.stderr
        assert proc.stdout == ""

    def test_missing_scenario_file_is_bad_input(self, tmp_path):
        proc = agorank(
            "run", "--scenario", str(tmp_path / "nope.json"),
            "--out", str(tmp_path / "rep"),
        )
        assert proc.returncode == 2

    def test_malformed_scenario_is_bad_input(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"name": "x"}', encoding="utf-8")
        proc = agorank("run", "--scenario", str(bad), "--out", str(tmp_path / "rep"))
        assert proc.returncode == 2

    def test_no_active_agents_exit_code(self, tmp_path):
        # dynamic policy, window 1, incompatible tagged agent whose objective
        # is trivially met: second query deactivates everyone
        (tmp_path / "catalog.csv").write_text(
            "id,provider_id,categories,popularity,sustainability,description\n"
            "i1,p1,beach,0.5,0.5,\n",
            encoding="utf-8",
        )
        scenario = {
            "name": "starved",
            "seed": 1,
            "catalog": "catalog.csv",
            "agents": [
                {
                    "agent_id": "narrow",
                    "role": "user",
                    "objective": "relevance",
                    "objective_metric": "ndcg",
                    "objective_target": 0.0,
                    "compatibility_tags": ["food"],
                }
            ],
            "policy": {
                "mode": "dynamic",
                "window": 1,
                "fairness_threshold": 0.5,
                "compatibility_min": 0.9,
            },
            "rule": "borda",
            "queries": [
                {"id": "q1", "preference_weights": {"beach": 1.0}, "top_n": 1},
                {"id": "q2", "preference_weights": {"beach": 1.0}, "top_n": 1},
            ],
        }
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(scenario), encoding="utf-8")
        proc = agorank("run", "--scenario", str(path), "--out", str(tmp_path / "rep"))
        assert proc.returncode == 3
        assert "error:" in proc.stderr


class TestDeterminism:
    def test_identical_reruns(self, tmp_path):
        for name in ("a", "b"):
            proc = agorank(
                "run", "--scenario", "builtin:tourism",
                "--out", str(tmp_path / name), "--seed", "42",
            )
            assert proc.returncode == 0
        for suffix in (".report.json", ".metrics.csv", ".summary.md"):
            assert (tmp_path / ("a" + suffix)).read_bytes() == (
                tmp_path / ("b" + suffix)
            ).read_bytes()

    def test_parallel_agents_identical(self, tmp_path):
        agorank(
            "run", "--scenario", "builtin:tourism", "--out", str(tmp_path / "serial")
        )
        agorank(
            "run", "--scenario", "builtin:tourism",
            "--out", str(tmp_path / "parallel"), "--parallel-agents",
        )
        assert (tmp_path / "serial.report.json").read_bytes() == (
            tmp_path / "parallel.report.json"
        ).read_bytes()

    def test_seed_changes_synthetic_run(self, tmp_path):
        for name, seed in (("a", "7"), ("b", "8")):
            proc = agorank(
                "run", "--scenario", "builtin:synthetic-200",
                "--out", str(tmp_path / name), "--seed", seed,
            )
            assert proc.returncode == 0
        assert (tmp_path / "a.report.json").read_bytes() != (
            tmp_path / "b.report.json"
        ).read_bytes()


class TestCompare:
    def test_all_rules(self, tmp_path):
        proc = agorank(
            "compare", "--scenario", "builtin:tourism", "--out", str(tmp_path / "cmp")
        )
        assert proc.returncode == 0
        payload = json.loads((tmp_path / "cmp.report.json").read_text())
        assert sorted(payload["rules"]) == [
            "borda", "copeland", "kemeny", "ranked_pairs"
        ]

    def test_single_rule(self, tmp_path):
        proc = agorank(
            "compare", "--scenario", "builtin:tourism",
            "--out", str(tmp_path / "cmp"), "--rule", "borda",
        )
        assert proc.returncode == 0
        payload = json.loads((tmp_path / "cmp.report.json").read_text())
        assert list(payload["rules"]) == ["borda"]

    def test_csv_carries_every_rule(self, tmp_path):
        agorank(
            "compare", "--scenario", "builtin:tourism", "--out", str(tmp_path / "cmp")
        )
        lines = (tmp_path / "cmp.metrics.csv").read_text().splitlines()
        rules = {line.split(",")[0] for line in lines[1:]}
        assert rules == {"borda", "copeland", "kemeny", "ranked_pairs"}
        assert len(lines) == 1 + 4 * 4


class TestEvaluate:
    def test_replay_reproduces_report(self, tmp_path):
        saved = tmp_path / "outcomes.json"
        proc = agorank(
            "run", "--scenario", "builtin:tourism", "--out", str(tmp_path / "orig"),
            "--save-outcomes", str(saved),
        )
        assert proc.returncode == 0
        proc = agorank(
            "evaluate", "--scenario", "builtin:tourism",
            "--out", str(tmp_path / "replay"), "--outcomes", str(saved),
        )
        assert proc.returncode == 0
        assert "rebuilt report" in proc.stdout
        assert (tmp_path / "orig.report.json").read_bytes() == (
            tmp_path / "replay.report.json"
        ).read_bytes()

    def test_wrong_catalog_exits_2(self, tmp_path):
        saved = tmp_path / "outcomes.json"
        agorank(
            "run", "--scenario", "builtin:tourism", "--out", str(tmp_path / "orig"),
            "--save-outcomes", str(saved),
        )
        proc = agorank(
            "evaluate", "--scenario", "builtin:synthetic-200",
            "--out", str(tmp_path / "replay"), "--outcomes", str(saved),
        )
        assert proc.returncode == 2
        assert "hash mismatch" in proc.stderr

    def test_missing_outcomes_file(self, tmp_path):
        proc = agorank(
            "evaluate", "--scenario", "builtin:tourism",
            "--out", str(tmp_path / "replay"),
            "--outcomes", str(tmp_path / "absent.json"),
        )
        assert proc.returncode == 2


class TestArgparse:
    def test_no_command_fails(self):
        proc = agorank()
        assert proc.returncode == 2
        assert "usage" in proc.stderr

    def test_help_mentions_subcommands(self):
        proc = agorank("--help")
        assert proc.returncode == 0
        for word in ("run", "compare", "evaluate"):
            assert word in proc.stdout
