"""Feed semantics: replay defense, censor rules, scenario runs."""

import json
import random

import pytest

from hoot import wire
from hoot.collider import SearchMode, SearchSpec, find_tag
from hoot.feed import (
    BlockSender,
    BlockShortTag,
    CensorPolicy,
    Feed,
    GroupSpec,
    RejectReason,
    ScenarioScript,
    WhitelistShortTag,
    load_scenario,
    run_scenario,
)
from hoot.tagcrypt import FAST_KDF, PlainTag, derive_tag_material, seal

K = 12
PARAMS = wire.WireParams(k=K)


def tag_of(plain: PlainTag):
    return derive_tag_material(plain, FAST_KDF, K).short_tag


def wire_line(message: bytes, plain: PlainTag, seed: int) -> str:
    return wire.encode(seal(message, [plain], k=K, rng=random.Random(seed)), PARAMS)


def colliding_pair(prefix_a="meet-", prefix_b="fans-", seed=5):
    """Two plain tags engineered to share a 12-bit short tag."""
    first = PlainTag(prefix_a + "base")
    spec = SearchSpec(
        prefix=prefix_b,
        target=first,
        suffix_length=3,
        mode=SearchMode.FIRST_N,
        count=1,
        k=K,
        seed=seed,
    )
    matches = find_tag(spec).matches
    assert matches, "no collision found; enlarge the suffix space"
    second = matches[0][0]
    assert tag_of(first) == tag_of(second)
    return first, second


def test_post_search_round_trip():
    feed = Feed(params=PARAMS)
    ours = PlainTag("round-trip")
    outcome = feed.post("alice", wire_line(b"hello", ours, 1))
    assert outcome.accepted and outcome.post_id == 1
    posts = feed.search(tag_of(ours))
    assert len(posts) == 1 and posts[0].sender == "alice"
    assert feed.search(tag_of(ours), since=posts[-1].id) == []
    assert feed.search(tag_of(PlainTag("unknown"))) == []


def test_replay_rejected_once_stored():
    feed = Feed(params=PARAMS)
    line = wire_line(b"again", PlainTag("replayer"), 2)
    assert feed.post("a", line).accepted
    second = feed.post("b", line)
    assert not second.accepted and second.reason is RejectReason.REPLAY
    assert len(feed) == 1


def test_fresh_seal_of_same_plaintext_accepted():
    feed = Feed(params=PARAMS)
    ours = PlainTag("fresh-keys")
    assert feed.post("a", wire_line(b"same text", ours, 3)).accepted
    assert feed.post("a", wire_line(b"same text", ours, 4)).accepted
    assert len(feed) == 2


def test_malformed_rejected():
    feed = Feed(params=PARAMS)
    outcome = feed.post("a", "not a wire line")
    assert not outcome.accepted and outcome.reason is RejectReason.MALFORMED
    assert outcome.detail == "no-tag"


def test_replay_horizon_eviction():
    feed = Feed(params=PARAMS, replay_horizon=2)
    lines = [wire_line(f"m{i}".encode(), PlainTag("horizon"), 10 + i) for i in range(3)]
    for line in lines:
        assert feed.post("a", line).accepted
    # the first key has been evicted, so its replay now passes
    assert feed.post("a", lines[0]).accepted
    assert not feed.post("a", lines[2]).accepted


def test_multi_tag_post_appears_in_both_searches():
    params = wire.WireParams(k=K, glyph_budget=280)
    feed = Feed(params=params)
    a, b = PlainTag("multi-a"), PlainTag("multi-b")
    line = wire.encode(seal(b"both", [a, b], k=K, rng=random.Random(7)), params)
    assert feed.post("x", line).accepted
    assert len(feed.search(tag_of(a))) == 1
    assert len(feed.search(tag_of(b))) == 1


def test_colliding_groups_share_one_search():
    ours, theirs = colliding_pair()
    feed = Feed(params=PARAMS)
    assert feed.post("a", wire_line(b"ours", ours, 20)).accepted
    assert feed.post("b", wire_line(b"theirs", theirs, 21)).accepted
    assert len(feed.search(tag_of(ours))) == 2


def test_block_short_tag_blocks_exactly_carriers():
    ours, theirs = colliding_pair()
    other = PlainTag("unrelated-group")
    policy = CensorPolicy((BlockShortTag(tag_of(ours)),))
    feed = Feed(params=PARAMS, policy=policy)
    blocked_a = feed.post("a", wire_line(b"m1", ours, 30))
    blocked_b = feed.post("b", wire_line(b"m2", theirs, 31))
    passed = feed.post("c", wire_line(b"m3", other, 32))
    assert blocked_a.reason is RejectReason.CENSORED and blocked_a.rule_index == 0
    assert blocked_b.reason is RejectReason.CENSORED
    assert passed.accepted
    assert len(feed) == 1


def test_block_sender():
    policy = CensorPolicy((BlockSender("mallory"),))
    feed = Feed(params=PARAMS, policy=policy)
    assert not feed.post("mallory", wire_line(b"m", PlainTag("any-group"), 40)).accepted
    assert feed.post("alice", wire_line(b"m", PlainTag("any-group"), 41)).accepted


def test_whitelist_blocks_iff_no_known_tag_opens():
    ours, theirs = colliding_pair()
    policy = CensorPolicy((WhitelistShortTag(tag_of(theirs), (theirs,)),))
    feed = Feed(params=PARAMS, policy=policy)
    covered = feed.post("fan", wire_line(b"fan talk", theirs, 50))
    hidden = feed.post("org", wire_line(b"our plan", ours, 51))
    assert covered.accepted
    assert hidden.reason is RejectReason.CENSORED and hidden.rule_index == 0
    # whitelist allow decides before a later block rule
    stacked = CensorPolicy(
        (WhitelistShortTag(tag_of(theirs), (theirs,)), BlockShortTag(tag_of(theirs)))
    )
    feed2 = Feed(params=PARAMS, policy=stacked)
    assert feed2.post("fan", wire_line(b"fan talk", theirs, 52)).accepted


def scenario_dict(policy, target="org", replays=0):
    ours, theirs = colliding_pair()
    return {
        "seed": 77,
        "k": K,
        "target_group": target,
        "groups": [
            {"name": "org", "plain_tag": ours.text, "messages": 10},
            {"name": "fans", "plain_tag": theirs.text, "messages": 100, "replays": replays},
        ],
        "policy": policy,
    }


def test_scenario_block_short_tag_is_heavy_handed():
    raw = scenario_dict([{"type": "block-short-tag", "plain_tag": scenario_dict([])["groups"][0]["plain_tag"]}])
    stats = run_scenario(load_scenario(json.dumps(raw)))
    assert stats.target_block_rate == 1.0
    assert stats.collateral_blocked == 100
    assert stats.accepted == 0


def test_scenario_whitelist_spares_known_cover():
    base = scenario_dict([])
    raw = scenario_dict(
        [
            {
                "type": "whitelist-short-tag",
                "plain_tag": base["groups"][0]["plain_tag"],
                "known_plain_tags": [base["groups"][1]["plain_tag"]],
            }
        ],
        replays=2,
    )
    stats = run_scenario(load_scenario(json.dumps(raw)))
    assert stats.target_block_rate == 1.0
    assert stats.collateral_blocked == 0
    assert stats.rejected_replay == 2
    assert stats.accepted == 100


def test_scenario_empty_policy_blocks_nothing():
    stats = run_scenario(load_scenario(json.dumps(scenario_dict([]))))
    assert stats.rejected_censored == 0
    assert stats.accepted == 110
    assert stats.target_block_rate == 0.0


def test_scenario_determinism():
    raw = json.dumps(scenario_dict([{"type": "block-sender", "sender": "fans"}]))
    first = run_scenario(load_scenario(raw)).render()
    second = run_scenario(load_scenario(raw)).render()
    assert first == second
    assert "target_block_rate = 0.0" in first


def test_scenario_cover_ratio():
    stats = run_scenario(load_scenario(json.dumps(scenario_dict([]))))
    token = [t for t, traffic in stats.per_tag.items() if traffic.target_posts][0]
    assert stats.per_tag[token].cover_ratio() == pytest.approx(10.0)
    assert stats.per_tag[token].groups == {"org", "fans"}


def test_script_validation():
    with pytest.raises(ValueError):
        ScenarioScript(groups=(GroupSpec("a", PlainTag("t1"), 1), GroupSpec("a", PlainTag("t2"), 1)))
    with pytest.raises(ValueError):
        ScenarioScript(groups=(GroupSpec("a", PlainTag("t1"), 1),), target_group="ghost")
    with pytest.raises(ValueError):
        load_scenario(json.dumps({"groups": [], "policy": [{"type": "mystery"}]}))
    with pytest.raises(ValueError):
        GroupSpec("a", PlainTag("t"), messages=1, rate=0.0)


def test_rule_tag_from_token():
    ours = PlainTag("token-rule")
    token = wire.encode_short_tag(tag_of(ours))
    script = load_scenario(
        json.dumps(
            {
                "seed": 1,
                "k": K,
                "groups": [{"name": "g", "plain_tag": ours.text, "messages": 3}],
                "policy": [{"type": "block-short-tag", "short_tag": f"#{token}"}],
            }
        )
    )
    stats = run_scenario(script)
    assert stats.rejected_censored == 3
