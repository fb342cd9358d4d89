"""Mediator behavior: rule interception, broadcast, exclusivity."""
import re
from pathlib import Path

import pytest

from socsim.controller import GlobalEvent, IMPLICIT_ALLOW, RuleValidationError, ValidationRule
from socsim.kernel import ActionRequest

SRC = Path(__file__).resolve().parents[1] / "src" / "socsim"

TALK_CATALOG = [
    {"name": "talk", "owner": "communication", "category": "social", "params": {"range": 8}},
]


@pytest.fixture
def talk_world(tmp_path):
    from tests.conftest import World

    w = World(tmp_path, catalog=TALK_CATALOG)
    for n in (1, 2):
        w.add_agent(n, cell=(2, 2))
    w.commit(0)
    return w


def talk(world, tick, caller="a00000001", target="a00000002"):
    return world.controller.route_action(
        ActionRequest(caller=caller, action_name="talk", args={"target": target}, tick=tick)
    )


class TestRules:
    def test_default_allow(self, talk_world):
        assert talk(talk_world, 5).ok

    def test_deny_window(self, talk_world):
        rule = ValidationRule(id="exam-rule", effect="deny", actions=("talk",), ticks=(100, 110))
        talk_world.controller.set_rules([rule])
        denied = talk(talk_world, 105)
        assert denied.status == "denied" and denied.rule_id == "exam-rule"
        assert talk(talk_world, 111).ok
        assert talk(talk_world, 99).ok

    def test_region_scoped_deny(self, talk_world):
        # both agents sit in region "west" (cell 2,2)
        rule = ValidationRule(id="west-hush", effect="deny", actions=("talk",), region="west")
        talk_world.controller.set_rules([rule])
        assert talk(talk_world, 1).status == "denied"
        talk_world.space.move("a00000001", [5, 5])  # into "east"
        assert talk(talk_world, 1).ok

    def test_first_match_wins(self, talk_world):
        rules = [
            ValidationRule(id="deny-talk", effect="deny", actions=("talk",)),
            ValidationRule(id="allow-talk", effect="allow", actions=("talk",)),
        ]
        talk_world.controller.set_rules(rules)
        assert talk(talk_world, 1).status == "denied"
        talk_world.controller.set_rules(list(reversed(rules)))
        assert talk(talk_world, 1).ok

    def test_empty_rules_allow_everything(self, talk_world):
        talk_world.controller.set_rules([])
        assert talk(talk_world, 1).ok

    def test_unknown_action_in_rule_rejected(self, talk_world):
        with pytest.raises(RuleValidationError):
            talk_world.controller.set_rules(
                [ValidationRule(id="r", effect="deny", actions=("teleport",))]
            )

    def test_unknown_region_rejected(self, talk_world):
        with pytest.raises(RuleValidationError):
            talk_world.controller.set_rules(
                [ValidationRule(id="r", effect="deny", actions=("talk",), region="moon")]
            )

    def test_validation_totality(self, talk_world):
        rule = ValidationRule(id="only-east", effect="deny", actions=("talk",), region="east")
        talk_world.rules.replace([rule])
        match = talk_world.rules.first_match("talk", None, "west", 3)
        assert match is IMPLICIT_ALLOW

    def test_intercepts_logged_with_rule_id(self, talk_world):
        rule = ValidationRule(id="exam-rule", effect="deny", actions=("talk",), ticks=(10, 20))
        talk_world.controller.set_rules([rule])
        attempts_in = [talk(talk_world, t) for t in (10, 15, 20)]
        attempts_out = [talk(talk_world, t) for t in (9, 21)]
        events = talk_world.flush()
        intercepts = [e for e in events if e.kind == "intercept"]
        assert len(intercepts) == 3 == sum(1 for a in attempts_in if a.status == "denied")
        assert all(e.attr("rule") == "exam-rule" for e in intercepts)
        assert all(a.ok for a in attempts_out)

    def test_rule_doc_round_trip(self):
        doc = {"id": "r1", "effect": "deny", "action": "talk", "ticks": [5, 9], "message": "shh"}
        rule = ValidationRule.from_doc(doc)
        assert rule.actions == ("talk",) and rule.ticks == (5, 9)


class TestBroadcast:
    def test_filter_matches_profile(self, world):
        for n, gender in zip(range(8), "MFMFMFMF"):
            world.add_agent(n, profile={"gender": gender, "birth_tick": 0})
        world.commit(0)
        count = world.controller.broadcast(
            GlobalEvent(name="exam-start", payload={"hall": "west"}, target_filter={"gender": "F"})
        )
        assert count == 4
        drained = world.system.messager.drain("a00000001", 2)
        assert drained and drained[0].sender == "SYSTEM"
        assert drained[0].payload["event"] == "exam-start"

    def test_filter_matching_nobody(self, world):
        world.add_agent(1)
        world.commit(0)
        assert world.controller.broadcast(GlobalEvent(name="x", target_filter={"gender": "X"})) == 0

    def test_broadcast_to_empty_population(self, world):
        assert world.controller.broadcast(GlobalEvent(name="x")) == 0


class TestExclusivity:
    """No module other than the Controller calls ActionFacade.invoke,
    Messager.send, or Environment.env_run."""

    RESTRICTED_CALL = re.compile(r"\.(invoke|env_run|send)\(")

    def test_restricted_calls_only_in_controller(self):
        offenders = []
        for path in sorted(SRC.rglob("*.py")):
            if path.name == "controller.py":
                continue
            for lineno, line in enumerate(path.read_text().splitlines(), 1):
                stripped = line.strip()
                if stripped.startswith("#") or stripped.startswith("def "):
                    continue
                if self.RESTRICTED_CALL.search(line):
                    offenders.append(f"{path.name}:{lineno}: {stripped}")
        assert offenders == []

    def test_plugins_do_not_import_restricted_facades(self):
        # Scenario and plugin modules must reach services only via the Controller.
        banned = re.compile(r"from\s+\S*(services|environment)\s+import\s+(Messager|Environment)\b")
        for name in ("plugins.py", "cognition.py"):
            text = (SRC / name).read_text()
            assert not banned.search(text), name


class TestRouteEvents:
    def test_every_top_level_route_produces_one_event(self, talk_world):
        talk(talk_world, 1)
        events = [e for e in talk_world.flush() if e.kind in ("action", "intercept")]
        actions = [e for e in events if e.attr("action") == "talk"]
        assert len(actions) == 1

    def test_nested_env_calls_fold_into_action_event(self, talk_world):
        # talk approaches via space moves; those must not produce extra events
        talk(talk_world, 1)
        events = talk_world.flush()
        env_events = [e for e in events if (e.attr("action") or "").startswith("env:")]
        assert env_events == []
