import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from actscore.match_data import (
    EVENT_KINDS,
    ChampionRoleTable,
    DerivedEvent,
    MatchParseError,
    TimelineEvent,
    ValidationError,
    compute_distance,
    derive_events,
    frame_tracks,
    impute_position,
    interpolate_positions,
    lookup_roles,
    parse_match,
    serialize_match,
    team_distances,
)

from conftest import dump, minimal_doc

TABLE = ChampionRoleTable.from_csv()


# ---- parsing


def test_minimal_document_parses():
    meta, events, frames = parse_match(dump(minimal_doc()), TABLE)
    assert meta.match_id == "T-1" and len(meta.players) == 10
    assert events == [] and len(frames) == 1
    assert [p.team for p in meta.players] == ["blue"] * 5 + ["red"] * 5


def test_duplicate_participant_rejected():
    doc = minimal_doc()
    doc["meta"]["players"][9]["participant_id"] = 9
    doc["meta"]["players"][9]["team"] = "red"
    with pytest.raises(ValidationError, match="duplicate participant"):
        parse_match(dump(doc))


def test_malformed_json_reports_byte_offset():
    with pytest.raises(MatchParseError) as info:
        parse_match(b'{"meta": {"match_id": "x",, }')
    assert info.value.offset == 26  # the second comma


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d["meta"].update(winner="green"), "meta.winner"),
        (lambda d: d["meta"]["players"].pop(), "meta.players"),
        (lambda d: d["meta"]["players"][0].update(team="red"), "meta.players[0].team"),
        (lambda d: d["meta"]["players"][0].update(champion="Foo"), "meta.players[0].champion"),
        (lambda d: d["meta"]["players"][3].update(lane="River"), "meta.players[3].lane"),
        (lambda d: d["frames"][0].update(timestamp_ms=1000), "frames[0].timestamp_ms"),
        (lambda d: d.update(frames=[]), "frames"),
        (lambda d: d["events"].append({"timestamp_ms": 0, "kind": "DANCE", "actor": 1}), "events[0].kind"),
        (lambda d: d["events"].append({"timestamp_ms": 10, "kind": "ITEM_PURCHASED", "actor": 1, "payload": {"cost": -1}}), "events[0].payload.cost"),
        (lambda d: d["events"].append({"timestamp_ms": 10, "kind": "CHAMPION_KILL", "actor": 1, "assisting": [1], "victim": 6}), "events[0].assisting"),
        (lambda d: d["events"].append({"timestamp_ms": 10, "kind": "CHAMPION_KILL", "actor": 1, "assisting": [7], "victim": 6}), "events[0].assisting"),
        (lambda d: d["events"].append({"timestamp_ms": 10, "kind": "CHAMPION_KILL", "actor": 1, "victim": 1}), "events[0].victim"),
        (lambda d: d["events"].append({"timestamp_ms": 10, "kind": "CHAMPION_KILL", "actor": 1, "victim": 2}), "events[0].victim"),
        (lambda d: d["events"].append({"timestamp_ms": 10, "kind": "CHAMPION_KILL", "actor": 1}), "events[0].victim"),
        (lambda d: d["events"].append({"timestamp_ms": 10, "kind": "WARD_PLACED", "actor": 1, "position": [0, 16000]}), "events[0].position"),
        (lambda d: d["events"].append({"timestamp_ms": 999_999, "kind": "WARD_PLACED", "actor": 1}), "events[0].timestamp_ms"),
    ],
)
def test_validation_errors_name_the_field(mutate, field):
    doc = minimal_doc(n_frames=2)
    mutate(doc)
    with pytest.raises(ValidationError) as info:
        parse_match(dump(doc), TABLE)
    assert info.value.field == field


def test_events_sorted_stably():
    evs = [
        {"timestamp_ms": 500, "kind": "WARD_PLACED", "actor": 2, "payload": {"bounty": 0}},
        {"timestamp_ms": 100, "kind": "WARD_PLACED", "actor": 3, "payload": {"bounty": 0}},
        {"timestamp_ms": 500, "kind": "WARD_PLACED", "actor": 1, "payload": {"bounty": 0}},
    ]
    _, events, _ = parse_match(dump(minimal_doc(n_frames=2, events=evs)))
    assert [(e.timestamp_ms, e.actor) for e in events] == [(100, 3), (500, 2), (500, 1)]


def test_synthetic_matches_round_trip(small_corpus):
    for gm in small_corpus.raw:
        blob = serialize_match(gm.meta, gm.events, gm.frames)
        meta, events, frames = parse_match(blob, TABLE)
        assert meta == gm.meta
        assert events == gm.events
        assert frames == gm.frames
        assert serialize_match(meta, events, frames) == blob


# ---- roles


def test_table_rows():
    assert lookup_roles("Annie", TABLE) == (0, 0, 1, 0, 0, 0)
    assert lookup_roles("Kayle", TABLE) == (0, 1, 0, 0, 1, 0)
    with pytest.raises(KeyError, match="Foo"):
        lookup_roles("Foo", TABLE)


def test_every_role_row_has_a_role():
    assert all(sum(v) >= 1 for v in TABLE.values())


def test_table_csv_round_trip(tmp_path):
    path = tmp_path / "roles.csv"
    TABLE.to_csv(path)
    assert ChampionRoleTable.from_csv(path) == TABLE


def test_table_rejects_roleless_champion(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("champion,assassin,fighter,mage,marksman,support,tank\nNobody,0,0,0,0,0,0\n")
    with pytest.raises(ValidationError):
        ChampionRoleTable.from_csv(path)


# ---- derived events


def test_champion_kill_expansion():
    ev = TimelineEvent(1000, "CHAMPION_KILL", 3, (5, 4), 7, None, {})
    out = derive_events([ev])
    assert [(d.kind, d.actor) for d in out] == [
        ("CHAMPION_KILL", 3),
        ("CHAMPION_KILL_ASSIST", 4),
        ("CHAMPION_KILL_ASSIST", 5),
        ("CHAMPION_KILL_VICTIM", 7),
    ]
    assert all(d.timestamp_ms == 1000 for d in out)


def test_objective_expansion_and_passthrough():
    evs = [
        TimelineEvent(5, "ITEM_PURCHASED", 1, (), None, None, {"cost": 300}),
        TimelineEvent(9, "BUILDING_KILL", 8, (6, 9), None, (100.0, 100.0), {"involved_players": 3}),
    ]
    out = derive_events(evs)
    assert [(d.kind, d.actor) for d in out] == [
        ("ITEM_PURCHASED", 1),
        ("BUILDING_KILL", 8),
        ("BUILDING_KILL_ASSIST", 6),
        ("BUILDING_KILL_ASSIST", 9),
    ]
    assert out[2].position == (100.0, 100.0)


def test_kill_without_victim_rejected():
    with pytest.raises(ValidationError):
        derive_events([TimelineEvent(0, "CHAMPION_KILL", 1)])


def test_derived_counts_over_generated_matches(small_corpus):
    for gm in small_corpus.raw:
        out = derive_events(gm.events)
        n_assists = sum(len(e.assisting) for e in gm.events if e.kind in ("CHAMPION_KILL", "BUILDING_KILL", "ELITE_MONSTER_KILL"))
        n_kills = sum(e.kind == "CHAMPION_KILL" for e in gm.events)
        assert len(out) == len(gm.events) + n_assists + n_kills
        assert all(1 <= d.actor <= 10 and d.kind in EVENT_KINDS for d in out)
        assert [d.timestamp_ms for d in out] == sorted(d.timestamp_ms for d in out)


# ---- positions


def _frames_with(pos_by_frame):
    doc = minimal_doc(n_frames=len(pos_by_frame))
    for f, pos in enumerate(pos_by_frame):
        doc["frames"][f]["players"]["1"]["position"] = list(pos)
    return parse_match(dump(doc))[2]


def test_impute_base_kinds():
    frames = _frames_with([(0, 0)])
    buy = DerivedEvent(0, "ITEM_PURCHASED", 2, None, None)
    assert impute_position(buy, frames, "blue") == (0.0, 0.0)
    sell = DerivedEvent(0, "ITEM_SOLD", 7, None, None)
    assert impute_position(sell, frames, "red") == (1.0, 1.0)


def test_impute_explicit_position():
    ev = DerivedEvent(0, "WARD_PLACED", 1, (7500.0, 7500.0), None)
    assert impute_position(ev, _frames_with([(0, 0)]), "blue") == (0.5, 0.5)


def test_impute_interpolates_between_frames():
    frames = _frames_with([(0, 0), (0, 0), (3000, 3000)])
    ev = DerivedEvent(90_000, "WARD_PLACED", 1, None, None)
    assert impute_position(ev, frames, "blue") == pytest.approx((0.1, 0.1), abs=1e-15)


def test_impute_clamps_after_last_frame():
    frames = _frames_with([(0, 0), (1500, 4500)])
    ev = DerivedEvent(200_000, "WARD_PLACED", 1, None, None)
    assert impute_position(ev, frames, "blue") == pytest.approx((0.1, 0.3))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 15000), st.integers(0, 15000)), min_size=1, max_size=6), st.floats(0, 1e6))
def test_interpolated_positions_in_unit_square(track, t):
    frames = _frames_with(track)
    times, tracks = frame_tracks(frames)
    out = interpolate_positions(times, tracks, [t])
    assert out.shape == (10, 1, 2)
    assert np.all((out >= 0) & (out <= 1))


# ---- distance


def test_distance_symmetric_pentagon():
    ang = 2 * np.pi * np.arange(5) / 5
    pts = 0.5 + 0.3 * np.column_stack([np.cos(ang), np.sin(ang)])
    for i in range(5):
        assert compute_distance(i, pts) == pytest.approx(0.4, abs=1e-12)


def test_distance_hand_example():
    pts = [(1, 0), (0, 0), (0, 0), (0, 0), (0, 0)]
    assert compute_distance(0, pts) == pytest.approx(1.0, abs=1e-15)
    assert compute_distance(1, pts) == pytest.approx(0.25, abs=1e-15)


def test_distance_degenerate():
    pts = [(0.3, 0.3)] * 5
    assert [compute_distance(i, pts) for i in range(5)] == [0.4] * 5


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=5, max_size=5))
def test_team_distances_sum_to_two(pts):
    pts = np.array(pts)
    total = sum(compute_distance(i, pts) for i in range(5))
    assert total == pytest.approx(2.0, abs=1e-9)
    vec = team_distances(np.repeat(pts[None], 5, axis=0), np.arange(5))
    np.testing.assert_allclose(vec, [compute_distance(i, pts) for i in range(5)], atol=1e-12)
    assert np.all((vec >= 0) & (vec <= 1))
