"""Match documents: parsing, derived event types, positions and isolation distance.

A match document is a JSON object with three top-level keys::

    {"meta":   {"match_id", "duration_ms", "winner", "players": [...]},
     "events": [{"timestamp_ms", "kind", "actor", "assisting", "victim",
                 "position", "payload"}, ...],
     "frames": [{"timestamp_ms", "players": {"1": {...}, ..., "10": {...}}}, ...]}

Coordinates are raw map units in [0, 15000]; timestamps are milliseconds.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

MAP_SIZE = 15000.0
FRAME_INTERVAL_MS = 60_000

TEAMS = ("blue", "red")
LANES = ("Top", "Mid", "Bottom", "Utility", "Jungle")
ROLES = ("assassin", "fighter", "mage", "marksman", "support", "tank")

RAW_KINDS = (
    "ITEM_PURCHASED",
    "ITEM_SOLD",
    "ITEM_DESTROYED",
    "SKILL_LEVEL_UP",
    "LEVEL_UP",
    "WARD_PLACED",
    "WARD_KILL",
    "CHAMPION_KILL",
    "BUILDING_KILL",
    "ELITE_MONSTER_KILL",
)
DERIVED_ONLY = (
    "CHAMPION_KILL_ASSIST",
    "CHAMPION_KILL_VICTIM",
    "BUILDING_KILL_ASSIST",
    "ELITE_MONSTER_KILL_ASSIST",
)
EVENT_KINDS = RAW_KINDS + DERIVED_ONLY

_ASSIST_KIND = {
    "CHAMPION_KILL": "CHAMPION_KILL_ASSIST",
    "BUILDING_KILL": "BUILDING_KILL_ASSIST",
    "ELITE_MONSTER_KILL": "ELITE_MONSTER_KILL_ASSIST",
}
_BASE_KINDS = ("ITEM_PURCHASED", "ITEM_SOLD")


class MatchParseError(ValueError):
    """The document is not well-formed JSON."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class ValidationError(ValueError):
    """The document parsed but violates a schema invariant."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def team_of(participant_id: int) -> str:
    return "blue" if participant_id <= 5 else "red"


@dataclass(frozen=True)
class Player:
    participant_id: int
    team: str
    champion: str
    lane: str


@dataclass(frozen=True)
class MatchRecord:
    match_id: str
    duration_ms: int
    winner: str
    players: tuple[Player, ...]

    def player(self, participant_id: int) -> Player:
        return self.players[participant_id - 1]


@dataclass(frozen=True)
class TimelineEvent:
    timestamp_ms: int
    kind: str
    actor: int
    assisting: tuple[int, ...] = ()
    victim: int | None = None
    position: tuple[float, float] | None = None
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DerivedEvent:
    """One credited action. ``source`` points back at the raw event it came from."""

    timestamp_ms: int
    kind: str
    actor: int
    position: tuple[float, float] | None
    source: TimelineEvent


@dataclass(frozen=True)
class PlayerFrame:
    position: tuple[float, float]
    total_gold: int
    minions_killed: int
    jungle_minions_killed: int
    level: int


@dataclass(frozen=True)
class FrameSnapshot:
    timestamp_ms: int
    players: dict[int, PlayerFrame]


# --------------------------------------------------------------------------
# champion -> role table


class ChampionRoleTable(dict):
    """Champion name -> 6-element multi-hot tuple in ``ROLES`` order."""

    @classmethod
    def from_csv(cls, path: str | Path | None = None) -> "ChampionRoleTable":
        if path is None:
            text = resources.files("actscore.data").joinpath("champion_roles.csv").read_text()
        else:
            text = Path(path).read_text()
        table = cls()
        for row in csv.DictReader(text.splitlines()):
            vec = tuple(int(row[r]) for r in ROLES)
            if any(v not in (0, 1) for v in vec) or sum(vec) == 0:
                raise ValidationError("champion_roles", f"bad role row for {row['champion']!r}")
            table[row["champion"]] = vec
        return table

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("champion",) + ROLES)
            for name, vec in self.items():
                w.writerow((name,) + tuple(vec))


def lookup_roles(champion: str, table: ChampionRoleTable) -> tuple[int, ...]:
    try:
        return table[champion]
    except KeyError:
        raise KeyError(f"unknown champion {champion!r}") from None


# --------------------------------------------------------------------------
# parsing


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"{where}.{key}", "missing")
    return obj[key]


def _as_int(value, name: str, lo: float = -math.inf, hi: float = math.inf) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise ValidationError(name, f"expected integer, got {value!r}")
    value = int(value)
    if not lo <= value <= hi:
        raise ValidationError(name, f"{value} outside [{lo}, {hi}]")
    return value


def _as_position(value, name: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValidationError(name, "expected [x, y]")
    x, y = (float(v) for v in value)
    if not (0 <= x <= MAP_SIZE and 0 <= y <= MAP_SIZE):
        raise ValidationError(name, f"coordinates ({x}, {y}) outside map")
    return (x, y)


def _parse_meta(meta: dict, table: ChampionRoleTable | None) -> MatchRecord:
    match_id = str(_require(meta, "match_id", "meta"))
    duration = _as_int(_require(meta, "duration_ms", "meta"), "meta.duration_ms", 0)
    winner = _require(meta, "winner", "meta")
    if winner not in TEAMS:
        raise ValidationError("meta.winner", f"expected blue|red, got {winner!r}")
    raw_players = _require(meta, "players", "meta")
    if not isinstance(raw_players, list) or len(raw_players) != 10:
        raise ValidationError("meta.players", "expected exactly 10 players")
    players = {}
    for i, p in enumerate(raw_players):
        where = f"meta.players[{i}]"
        pid = _as_int(_require(p, "participant_id", where), f"{where}.participant_id", 1, 10)
        if pid in players:
            raise ValidationError(f"{where}.participant_id", f"duplicate participant {pid}")
        team = _require(p, "team", where)
        if team != team_of(pid):
            raise ValidationError(f"{where}.team", f"participant {pid} must be on {team_of(pid)}")
        champion = str(_require(p, "champion", where))
        if table is not None and champion not in table:
            raise ValidationError(f"{where}.champion", f"unknown champion {champion!r}")
        lane = _require(p, "lane", where)
        if lane not in LANES:
            raise ValidationError(f"{where}.lane", f"unknown lane {lane!r}")
        players[pid] = Player(pid, team, champion, lane)
    return MatchRecord(match_id, duration, winner, tuple(players[i] for i in range(1, 11)))


def _parse_event(e: dict, i: int, duration: int) -> TimelineEvent:
    where = f"events[{i}]"
    ts = _as_int(_require(e, "timestamp_ms", where), f"{where}.timestamp_ms", 0, duration)
    kind = _require(e, "kind", where)
    if kind not in RAW_KINDS:
        raise ValidationError(f"{where}.kind", f"unknown event kind {kind!r}")
    actor = _as_int(_require(e, "actor", where), f"{where}.actor", 1, 10)
    assisting = tuple(
        _as_int(a, f"{where}.assisting", 1, 10) for a in e.get("assisting") or ()
    )
    if actor in assisting:
        raise ValidationError(f"{where}.assisting", "actor listed as its own assister")
    if len(set(assisting)) != len(assisting):
        raise ValidationError(f"{where}.assisting", "duplicate assister")
    victim = e.get("victim")
    if victim is not None:
        victim = _as_int(victim, f"{where}.victim", 1, 10)
        if victim == actor:
            raise ValidationError(f"{where}.victim", "victim equals actor")
    position = e.get("position")
    if position is not None:
        position = _as_position(position, f"{where}.position")
    payload = e.get("payload") or {}
    if not isinstance(payload, dict):
        raise ValidationError(f"{where}.payload", "expected an object")
    for key, val in payload.items():
        vals = val if isinstance(val, list) else [val]
        for v in vals:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 or not math.isfinite(v):
                raise ValidationError(f"{where}.payload.{key}", f"expected non-negative number, got {v!r}")
    return TimelineEvent(ts, kind, actor, assisting, victim, position, payload)


def _parse_frame(f: dict, i: int) -> FrameSnapshot:
    where = f"frames[{i}]"
    ts = _as_int(_require(f, "timestamp_ms", where), f"{where}.timestamp_ms", 0)
    if ts != i * FRAME_INTERVAL_MS:
        raise ValidationError(f"{where}.timestamp_ms", f"expected {i * FRAME_INTERVAL_MS}, got {ts}")
    raw = _require(f, "players", where)
    if not isinstance(raw, dict) or sorted(int(k) for k in raw) != list(range(1, 11)):
        raise ValidationError(f"{where}.players", "expected records for participants 1..10")
    players = {}
    for key, rec in raw.items():
        pw = f"{where}.players.{key}"
        players[int(key)] = PlayerFrame(
            position=_as_position(_require(rec, "position", pw), f"{pw}.position"),
            total_gold=_as_int(_require(rec, "total_gold", pw), f"{pw}.total_gold", 0),
            minions_killed=_as_int(_require(rec, "minions_killed", pw), f"{pw}.minions_killed", 0),
            jungle_minions_killed=_as_int(
                _require(rec, "jungle_minions_killed", pw), f"{pw}.jungle_minions_killed", 0
            ),
            level=_as_int(_require(rec, "level", pw), f"{pw}.level", 1),
        )
    return FrameSnapshot(ts, dict(sorted(players.items())))


def parse_match(
    data: bytes | str, table: ChampionRoleTable | None = None
) -> tuple[MatchRecord, list[TimelineEvent], list[FrameSnapshot]]:
    """Parse and validate one match document.

    Raises ``MatchParseError`` for malformed JSON and ``ValidationError`` for
    documents that violate the schema. When ``table`` is given, every champion
    must resolve in it. Events come back sorted by timestamp (stable).
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MatchParseError(exc.msg, len(text[: exc.pos].encode("utf-8"))) from None
    if not isinstance(doc, dict):
        raise ValidationError("document", "expected a JSON object")
    meta = _parse_meta(_require(doc, "meta", "document"), table)
    raw_events = doc.get("events") or []
    raw_frames = doc.get("frames") or []
    events = [_parse_event(e, i, meta.duration_ms) for i, e in enumerate(raw_events)]
    frames = [_parse_frame(f, i) for i, f in enumerate(raw_frames)]
    if not frames:
        raise ValidationError("frames", "at least the t=0 snapshot is required")
    for i, ev in enumerate(events):
        for pid in ev.assisting:
            if team_of(pid) != team_of(ev.actor):
                raise ValidationError(f"events[{i}].assisting", f"assister {pid} not on actor's team")
        if ev.kind == "CHAMPION_KILL":
            if ev.victim is None:
                raise ValidationError(f"events[{i}].victim", "CHAMPION_KILL requires a victim")
            if team_of(ev.victim) == team_of(ev.actor):
                raise ValidationError(f"events[{i}].victim", "victim on the killer's team")
    events.sort(key=lambda ev: ev.timestamp_ms)
    return meta, events, frames


def match_to_dict(
    meta: MatchRecord, events: list[TimelineEvent], frames: list[FrameSnapshot]
) -> dict:
    def event_dict(ev: TimelineEvent) -> dict:
        out = {"timestamp_ms": ev.timestamp_ms, "kind": ev.kind, "actor": ev.actor}
        if ev.assisting:
            out["assisting"] = list(ev.assisting)
        if ev.victim is not None:
            out["victim"] = ev.victim
        if ev.position is not None:
            out["position"] = list(ev.position)
        if ev.payload:
            out["payload"] = ev.payload
        return out

    return {
        "meta": {
            "match_id": meta.match_id,
            "duration_ms": meta.duration_ms,
            "winner": meta.winner,
            "players": [
                {"participant_id": p.participant_id, "team": p.team,
                 "champion": p.champion, "lane": p.lane}
                for p in meta.players
            ],
        },
        "events": [event_dict(ev) for ev in events],
        "frames": [
            {
                "timestamp_ms": f.timestamp_ms,
                "players": {
                    str(pid): {
                        "position": list(pf.position),
                        "total_gold": pf.total_gold,
                        "minions_killed": pf.minions_killed,
                        "jungle_minions_killed": pf.jungle_minions_killed,
                        "level": pf.level,
                    }
                    for pid, pf in f.players.items()
                },
            }
            for f in frames
        ],
    }


def serialize_match(meta, events, frames) -> bytes:
    return json.dumps(match_to_dict(meta, events, frames), separators=(",", ":")).encode()


# --------------------------------------------------------------------------
# derived events


def derive_events(events: list[TimelineEvent]) -> list[DerivedEvent]:
    """Credit every involved player with their own action.

    A champion kill yields the kill, one assist per assister (ascending id) and
    the victim's death; building and elite-monster kills yield the kill plus
    assists. Everything else passes through.
    """
    out: list[DerivedEvent] = []
    for ev in events:
        out.append(DerivedEvent(ev.timestamp_ms, ev.kind, ev.actor, ev.position, ev))
        assist_kind = _ASSIST_KIND.get(ev.kind)
        if assist_kind is None:
            continue
        for pid in sorted(ev.assisting):
            out.append(DerivedEvent(ev.timestamp_ms, assist_kind, pid, ev.position, ev))
        if ev.kind == "CHAMPION_KILL":
            if ev.victim is None:
                raise ValidationError("victim", "CHAMPION_KILL requires a victim")
            out.append(DerivedEvent(ev.timestamp_ms, "CHAMPION_KILL_VICTIM", ev.victim, ev.position, ev))
    # sort is stable, so expansion order survives among equal timestamps
    out.sort(key=lambda d: d.timestamp_ms)
    return out


# --------------------------------------------------------------------------
# positions and distance


def frame_tracks(frames: list[FrameSnapshot]) -> tuple[np.ndarray, np.ndarray]:
    """Frame times (F,) and per-player raw positions (10, F, 2)."""
    times = np.array([f.timestamp_ms for f in frames], dtype=float)
    pos = np.array(
        [[f.players[pid].position for f in frames] for pid in range(1, 11)], dtype=float
    )
    return times, pos


def interpolate_positions(times: np.ndarray, tracks: np.ndarray, ts) -> np.ndarray:
    """Normalized positions of all 10 players at timestamps ``ts`` -> (10, len(ts), 2).

    Linear between bracketing snapshots; held at the last snapshot afterwards.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    out = np.empty((10, ts.size, 2))
    for p in range(10):
        for c in range(2):
            out[p, :, c] = np.interp(ts, times, tracks[p, :, c])
    return np.clip(out / MAP_SIZE, 0.0, 1.0)


def impute_position(
    event: DerivedEvent, snapshots: list[FrameSnapshot], team: str
) -> tuple[float, float]:
    if event.position is not None:
        x, y = event.position
        return (x / MAP_SIZE, y / MAP_SIZE)
    if event.kind in _BASE_KINDS:
        return (0.0, 0.0) if team == "blue" else (1.0, 1.0)
    times, tracks = frame_tracks(snapshots)
    xy = interpolate_positions(times, tracks, event.timestamp_ms)[event.actor - 1, 0]
    return (float(xy[0]), float(xy[1]))


def compute_distance(actor_index: int, positions) -> float:
    """Isolation of teammate ``actor_index`` (0..4) among 5 normalized positions.

    Share of the actor's distances in the sum over all 10 teammate pairs.
    Falls back to the symmetric value 0.4 when everyone is co-located.
    """
    pts = np.asarray(positions, dtype=float)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    total = d[np.triu_indices(5, 1)].sum()
    if total < 1e-12:
        return 0.4
    # the share cannot exceed 1; clip the round-off when the actor holds every nonzero distance
    return float(min(d[actor_index].sum() / total, 1.0))


def team_distances(team_pos: np.ndarray, actor_index: np.ndarray) -> np.ndarray:
    """Vectorized ``compute_distance``: team_pos (N, 5, 2), actor_index (N,) -> (N,)."""
    diff = team_pos[:, :, None, :] - team_pos[:, None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    total = d.sum(axis=(1, 2)) / 2.0
    num = d[np.arange(len(actor_index)), actor_index].sum(-1)
    out = np.full(len(actor_index), 0.4)
    ok = total >= 1e-12
    out[ok] = np.minimum(num[ok] / total[ok], 1.0)
    return out
