"""Turn parsed matches into per-player sequences of 30-dim action vectors.

Vector layout (index: meaning)::

    0       timestamp / match duration
    1-6     roles: mage, fighter, support, tank, assassin, marksman
    7-11    lanes: Top, Mid, Bottom, Utility, Jungle
    12-13   x, y position scaled to [0, 1]
    14      isolation distance from teammates
    15-28   event type one-hot, in EVENT_KINDS order
    29      event weight
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .match_data import (
    EVENT_KINDS,
    LANES,
    ROLES,
    ChampionRoleTable,
    DerivedEvent,
    FrameSnapshot,
    MatchRecord,
    TimelineEvent,
    derive_events,
    frame_tracks,
    interpolate_positions,
    lookup_roles,
    team_distances,
    MAP_SIZE,
)

N_FEATURES = 30
N_PLAYERS = 10

VECTOR_ROLES = ("mage", "fighter", "support", "tank", "assassin", "marksman")
_ROLE_PERM = [ROLES.index(r) for r in VECTOR_ROLES]

SLOT_TIMESTAMP = 0
SLOT_ROLES = slice(1, 7)
SLOT_LANES = slice(7, 12)
SLOT_X, SLOT_Y, SLOT_DISTANCE = 12, 13, 14
SLOT_EVENTS = slice(15, 29)
SLOT_WEIGHT = 29

FEATURE_NAMES = (
    ("timestamp",)
    + VECTOR_ROLES
    + tuple(lane.lower() for lane in LANES)
    + ("x_position", "y_position", "distance")
    + EVENT_KINDS
    + ("event_weight",)
)

_KIND_INDEX = {k: i for i, k in enumerate(EVENT_KINDS)}


@dataclass(frozen=True)
class MatchConstants:
    highest_item_purchase_cost: float
    highest_item_sell_cost: float
    highest_ward_bounty: float
    number_of_players: int = N_PLAYERS

    def __post_init__(self):
        for name in ("highest_item_purchase_cost", "highest_item_sell_cost", "highest_ward_bounty"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def for_version(cls, version: str = "synthetic", path: str | Path | None = None) -> "MatchConstants":
        if path is None:
            text = resources.files("actscore.data").joinpath("match_constants.json").read_text()
        else:
            text = Path(path).read_text()
        table = json.loads(text)
        if version not in table:
            raise KeyError(f"no match constants for game version {version!r}")
        return cls(**table[version])


class MissingPayloadError(KeyError):
    def __init__(self, kind: str, field_name: str):
        super().__init__(f"{kind} event is missing payload field {field_name!r}")
        self.kind = kind
        self.field = field_name


def _payload(ev: DerivedEvent, key: str):
    try:
        return ev.source.payload[key]
    except KeyError:
        raise MissingPayloadError(ev.kind, key) from None


def _attacker_damage(ev: DerivedEvent) -> float:
    damage = _payload(ev, "damage_dealt")
    attackers = (ev.source.actor,) + tuple(ev.source.assisting)
    if len(damage) != len(attackers):
        raise MissingPayloadError(ev.kind, "damage_dealt")
    return float(damage[attackers.index(ev.actor)])


def event_weight(ev: DerivedEvent, consts: MatchConstants, level_rank: int | None = None) -> float:
    """Magnitude of one action, clamped to [0, 1].

    ``level_rank`` (1 = highest level in the match at that moment) is required
    for LEVEL_UP events only.
    """
    kind = ev.kind
    if kind in ("ITEM_PURCHASED", "ITEM_DESTROYED"):
        w = _payload(ev, "cost") / consts.highest_item_purchase_cost
    elif kind == "ITEM_SOLD":
        w = _payload(ev, "sell_value") / consts.highest_item_sell_cost
    elif kind == "SKILL_LEVEL_UP":
        top = _payload(ev, "max_skill_level")
        w = _payload(ev, "skill_level") / top if top > 0 else 1.0
    elif kind == "LEVEL_UP":
        if level_rank is None:
            raise MissingPayloadError(kind, "level_rank")
        w = level_rank / consts.number_of_players
    elif kind in ("WARD_PLACED", "WARD_KILL"):
        w = _payload(ev, "bounty") / consts.highest_ward_bounty
    elif kind in ("CHAMPION_KILL", "CHAMPION_KILL_ASSIST", "CHAMPION_KILL_VICTIM"):
        received = _payload(ev, "total_damage_received")
        if kind == "CHAMPION_KILL_VICTIM":
            dealt = _payload(ev, "victim_damage_dealt")
        else:
            dealt = _attacker_damage(ev)
        w = dealt / received if received > 0 else 0.0
    else:
        w = 1.0 / max(_payload(ev, "involved_players"), 1)
    return float(min(max(w, 0.0), 1.0))


def level_rank(levels: dict[int, int], pid: int) -> int:
    """1-based rank of ``pid`` by level, ties going to the lower participant id."""
    mine = levels[pid]
    return 1 + sum(1 for q, lv in levels.items() if lv > mine or (lv == mine and q < pid))


def vectorize(
    ev: DerivedEvent,
    roles,
    lane: str,
    position: tuple[float, float],
    distance: float,
    weight: float,
    duration_ms: int,
) -> np.ndarray:
    if duration_ms <= 0:
        raise ValueError("duration_ms must be > 0")
    v = np.zeros(N_FEATURES)
    v[SLOT_TIMESTAMP] = min(ev.timestamp_ms / duration_ms, 1.0)
    v[SLOT_ROLES] = np.asarray(roles, dtype=float)[_ROLE_PERM]
    v[SLOT_LANES.start + LANES.index(lane)] = 1.0
    v[SLOT_X], v[SLOT_Y] = position
    v[SLOT_DISTANCE] = distance
    v[SLOT_EVENTS.start + _KIND_INDEX[ev.kind]] = 1.0
    v[SLOT_WEIGHT] = weight
    return v


def check_vector(v: np.ndarray) -> list[str]:
    """List the layout invariants ``v`` breaks (empty when valid)."""
    problems = []
    if v.shape != (N_FEATURES,):
        return [f"shape {v.shape}"]
    if not np.all((v >= 0) & (v <= 1)):
        problems.append("entry outside [0, 1]")
    for name, sl in (("roles", SLOT_ROLES), ("lanes", SLOT_LANES), ("events", SLOT_EVENTS)):
        if not np.all((v[sl] == 0) | (v[sl] == 1)):
            problems.append(f"{name} not 0/1")
    if v[SLOT_LANES].sum() != 1:
        problems.append("lane not one-hot")
    if v[SLOT_EVENTS].sum() != 1:
        problems.append("event type not one-hot")
    if v[SLOT_ROLES].sum() < 1:
        problems.append("no role set")
    return problems


@dataclass
class MatchSample:
    match_id: str
    winner: str
    sequences: list[np.ndarray]
    lanes: tuple[str, ...]
    baseline: dict[str, np.ndarray]
    # (timestamp_ms, kind) for every row of every sequence; not serialized
    actions: list[list[tuple[int, str]]] | None = field(default=None, compare=False)

    @property
    def n_actions(self) -> int:
        return sum(len(s) for s in self.sequences)


def baseline_metrics(derived: list[DerivedEvent], snapshots: list[FrameSnapshot]) -> dict[str, np.ndarray]:
    """Per-player kills, deaths, assists, KDA, final gold and creep score (arrays of 10)."""
    kills = np.zeros(N_PLAYERS)
    deaths = np.zeros(N_PLAYERS)
    assists = np.zeros(N_PLAYERS)
    for ev in derived:
        if ev.kind == "CHAMPION_KILL":
            kills[ev.actor - 1] += 1
        elif ev.kind == "CHAMPION_KILL_ASSIST":
            assists[ev.actor - 1] += 1
        elif ev.kind == "CHAMPION_KILL_VICTIM":
            deaths[ev.actor - 1] += 1
    last = snapshots[-1].players
    gold = np.array([last[p].total_gold for p in range(1, 11)], dtype=float)
    creep = np.array(
        [last[p].minions_killed + last[p].jungle_minions_killed for p in range(1, 11)], dtype=float
    )
    return {
        "kills": kills,
        "deaths": deaths,
        "assists": assists,
        "kda": (kills + assists) / np.maximum(deaths, 1),
        "gold": gold,
        "creep": creep,
    }


def build_match_sample(
    meta: MatchRecord,
    events: list[TimelineEvent],
    snapshots: list[FrameSnapshot],
    table: ChampionRoleTable,
    consts: MatchConstants,
) -> MatchSample:
    """Full pipeline for one match: derive -> position -> distance -> weight -> vector."""
    derived = derive_events(events)
    lanes = tuple(p.lane for p in meta.players)
    roles = np.array([lookup_roles(p.champion, table) for p in meta.players], dtype=float)[:, _ROLE_PERM]
    baseline = baseline_metrics(derived, snapshots)
    n = len(derived)
    if n == 0:
        return MatchSample(
            meta.match_id, meta.winner, [np.zeros((0, N_FEATURES)) for _ in range(N_PLAYERS)],
            lanes, baseline, [[] for _ in range(N_PLAYERS)],
        )
    if meta.duration_ms <= 0:
        raise ValueError("duration_ms must be > 0 for a match with events")

    ts = np.array([d.timestamp_ms for d in derived], dtype=float)
    actor = np.array([d.actor - 1 for d in derived])
    times, tracks = frame_tracks(snapshots)
    everyone = interpolate_positions(times, tracks, ts)  # (10, n, 2)

    actor_pos = everyone[actor, np.arange(n)]
    for i, d in enumerate(derived):
        if d.position is not None:
            actor_pos[i] = (d.position[0] / MAP_SIZE, d.position[1] / MAP_SIZE)
        elif d.kind in ("ITEM_PURCHASED", "ITEM_SOLD"):
            actor_pos[i] = 0.0 if d.actor <= 5 else 1.0

    team_start = np.where(actor < 5, 0, 5)
    idx = team_start[:, None] + np.arange(5)[None, :]  # (n, 5)
    team_pos = everyone[idx, np.arange(n)[:, None]]  # (n, 5, 2)
    in_team = actor - team_start
    team_pos[np.arange(n), in_team] = actor_pos
    distance = team_distances(team_pos, in_team)

    levels = {p: 1 for p in range(1, 11)}
    weights = np.empty(n)
    for i, d in enumerate(derived):
        rank = None
        if d.kind == "LEVEL_UP":
            levels[d.actor] = int(_payload(d, "level"))
            rank = level_rank(levels, d.actor)
        weights[i] = event_weight(d, consts, rank)

    X = np.zeros((n, N_FEATURES))
    X[:, SLOT_TIMESTAMP] = np.minimum(ts / meta.duration_ms, 1.0)
    X[:, SLOT_ROLES] = roles[actor]
    lane_idx = np.array([LANES.index(lanes[a]) for a in actor])
    X[np.arange(n), SLOT_LANES.start + lane_idx] = 1.0
    X[:, SLOT_X] = actor_pos[:, 0]
    X[:, SLOT_Y] = actor_pos[:, 1]
    X[:, SLOT_DISTANCE] = distance
    kind_idx = np.array([_KIND_INDEX[d.kind] for d in derived])
    X[np.arange(n), SLOT_EVENTS.start + kind_idx] = 1.0
    X[:, SLOT_WEIGHT] = weights

    sequences = [X[actor == p] for p in range(N_PLAYERS)]
    actions = [[] for _ in range(N_PLAYERS)]
    for d in derived:
        actions[d.actor - 1].append((d.timestamp_ms, d.kind))
    return MatchSample(meta.match_id, meta.winner, sequences, lanes, baseline, actions)


# --------------------------------------------------------------------------
# line-delimited storage

_BASELINE_KEYS = ("kills", "deaths", "assists", "kda", "gold", "creep")


def sample_to_json(sample: MatchSample) -> str:
    # repr-based floats round-trip bit-exactly
    record = {
        "match_id": sample.match_id,
        "winner": sample.winner,
        "lanes": list(sample.lanes),
        "sequences": [s.tolist() for s in sample.sequences],
        "baseline": {k: sample.baseline[k].tolist() for k in _BASELINE_KEYS},
    }
    if sample.actions is not None:
        record["actions"] = [[[t, k] for t, k in acts] for acts in sample.actions]
    return json.dumps(record, separators=(",", ":"))


def sample_from_json(line: str) -> MatchSample:
    rec = json.loads(line)
    seqs = [np.array(s, dtype=float).reshape(-1, N_FEATURES) for s in rec["sequences"]]
    if len(seqs) != N_PLAYERS:
        raise ValueError(f"match {rec.get('match_id')}: expected 10 sequences")
    actions = rec.get("actions")
    if actions is not None:
        actions = [[(int(t), k) for t, k in acts] for acts in actions]
    return MatchSample(
        rec["match_id"],
        rec["winner"],
        seqs,
        tuple(rec["lanes"]),
        {k: np.array(rec["baseline"][k], dtype=float) for k in _BASELINE_KEYS},
        actions,
    )


def write_samples(samples, path: str | Path) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(sample_to_json(s) + "\n")


def read_samples(path: str | Path) -> list[MatchSample]:
    with open(path) as fh:
        return [sample_from_json(line) for line in fh if line.strip()]
