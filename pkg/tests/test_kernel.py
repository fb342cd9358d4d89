"""Kernel types: canonical ordering and event record serialization."""
import functools
import random

import pytest
from hypothesis import given, strategies as st

from socsim.kernel import (
    SYSTEM,
    ActionResult,
    EventRecord,
    KernelError,
    Message,
    agent_id,
    canonical_order,
)


def msg(tick, sender, seq, mid="m", recipients=("a00000001",)):
    return Message(id=mid, sender=sender, recipients=tuple(recipients), payload="x", send_tick=tick, seq=seq)


class TestCanonicalOrder:
    def test_identical_messages_equal(self):
        a = msg(3, "a00000000", 0)
        assert canonical_order(a, a) == 0

    def test_tick_dominates(self):
        first = msg(3, "a00000000", 0)
        second = msg(2, "a00000025", 9)
        assert canonical_order(first, second) == 1
        assert canonical_order(second, first) == -1

    def test_system_sorts_before_agents(self):
        sys_msg = msg(1, SYSTEM, 5)
        agent_msg = msg(1, agent_id(0), 0)
        assert canonical_order(sys_msg, agent_msg) == -1

    def test_sorted_matches_independent_oracle(self):
        # Oracle: stable sort on the raw (tick, sender, seq) triple.
        rng = random.Random(7)
        messages = [
            msg(rng.randint(0, 5), agent_id(rng.randint(0, 9)), rng.randint(0, 99), mid=str(i))
            for i in range(100)
        ]
        oracle = sorted(messages, key=lambda m: (m.send_tick, m.sender, m.seq))
        by_comparator = sorted(messages, key=functools.cmp_to_key(canonical_order))
        assert [m.sort_key() for m in by_comparator] == [m.sort_key() for m in oracle]

    @given(st.permutations(list(range(40))))
    def test_permutation_invariance(self, perm):
        base = [msg(i % 3, agent_id(i % 5), i, mid=str(i)) for i in range(40)]
        shuffled = [base[i] for i in perm]
        assert sorted(shuffled, key=Message.sort_key) == sorted(base, key=Message.sort_key)

    def test_empty_recipients_rejected(self):
        with pytest.raises(KernelError):
            Message(id="m", sender="a", recipients=(), payload="", send_tick=0, seq=0)


class TestEventRecord:
    def test_line_round_trip(self):
        e = EventRecord.make(12, "birth", agent_id(3), mother=agent_id(1), gender="F")
        line = e.to_line()
        assert EventRecord.from_line(line) == e
        assert EventRecord.from_line(line).to_line() == line

    @given(
        st.integers(min_value=0, max_value=10**6),
        st.sampled_from(["action", "death", "message", "warning"]),
        st.dictionaries(
            st.text(alphabet="abcdefgh_", min_size=1, max_size=8).filter(
                lambda k: k not in ("tick", "kind", "subject")
            ),
            st.text(max_size=30),
            max_size=5,
        ),
    )
    def test_round_trip_property(self, tick, kind, attrs):
        e = EventRecord.make(tick, kind, agent_id(1), **attrs)
        assert EventRecord.from_line(e.to_line()).to_line() == e.to_line()

    def test_escaping_survives_tabs_and_newlines(self):
        e = EventRecord.make(1, "warning", SYSTEM, detail="a\tb\nc\\d")
        back = EventRecord.from_line(e.to_line())
        assert back.attr("detail") == "a\tb\nc\\d"

    def test_keys_sorted_tab_separated(self):
        e = EventRecord.make(5, "action", agent_id(0), zed="1", alpha="2")
        keys = [part.split("=")[0] for part in e.to_line().split("\t")]
        assert keys == sorted(keys)

    def test_unknown_kind_rejected(self):
        with pytest.raises(KernelError):
            EventRecord.make(0, "party", SYSTEM)

    def test_reserved_attr_rejected(self):
        with pytest.raises(KernelError):
            EventRecord(tick=0, kind="action", subject=SYSTEM, attributes=(("tick", "1"),))


class TestActionResult:
    def test_denied_requires_rule_id(self):
        with pytest.raises(KernelError):
            ActionResult("denied", "nope")
        assert ActionResult("denied", "nope", rule_id="r1").rule_id == "r1"

    def test_ok_flag(self):
        assert ActionResult("ok").ok
        assert not ActionResult("failed").ok
