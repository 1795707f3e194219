"""Synthetic matches with a known value for every action.

Each action's latent value is linear in its feature vector, ``v = w* . x``.
The winner is the team with the larger summed latent value (plus optional
Gaussian noise), then flipped with probability ``label_flip_probability``,
so a perfect scorer is capped at ``1 - p`` accuracy.

Matches are generated from per-match seeds ``SeedSequence([seed, index])``,
so any subset can be regenerated independently and in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
from scipy.stats import spearmanr

from .featurizer import (
    FEATURE_NAMES,
    N_FEATURES,
    MatchConstants,
    MatchSample,
    build_match_sample,
)
from .match_data import (
    FRAME_INTERVAL_MS,
    LANES,
    MAP_SIZE,
    ChampionRoleTable,
    FrameSnapshot,
    MatchRecord,
    Player,
    PlayerFrame,
    TimelineEvent,
    team_of,
)


def _default_latent_weights() -> np.ndarray:
    # Routine kinds are negative so the mean action value is about zero and the
    # number of actions alone says nothing about the winner. A kill is worth
    # exactly what the matching death costs.
    w = dict.fromkeys(FEATURE_NAMES, 0.0)
    w.update(
        timestamp=0.05,
        distance=-0.05,
        ITEM_PURCHASED=-0.3,
        ITEM_SOLD=-0.6,
        ITEM_DESTROYED=-0.35,
        SKILL_LEVEL_UP=-0.3,
        LEVEL_UP=-0.25,
        WARD_PLACED=-0.2,
        WARD_KILL=0.0,
        CHAMPION_KILL=0.6,
        CHAMPION_KILL_ASSIST=0.1,
        CHAMPION_KILL_VICTIM=-0.6,
        BUILDING_KILL=0.3,
        BUILDING_KILL_ASSIST=0.05,
        ELITE_MONSTER_KILL=0.3,
        ELITE_MONSTER_KILL_ASSIST=0.05,
        event_weight=0.2,
    )
    return np.array([w[n] for n in FEATURE_NAMES])


DEFAULT_LATENT_WEIGHTS = _default_latent_weights()

# relative frequency of each raw kind an actor initiates, per lane
_KIND_ORDER = (
    "ITEM_PURCHASED", "ITEM_SOLD", "ITEM_DESTROYED", "SKILL_LEVEL_UP", "LEVEL_UP",
    "WARD_PLACED", "WARD_KILL", "CHAMPION_KILL", "BUILDING_KILL", "ELITE_MONSTER_KILL",
)
_LANE_KIND_RATES = {
    "Top":     (20, 4, 8, 15, 14, 6, 3, 14, 12, 4),
    "Mid":     (20, 4, 8, 15, 14, 6, 3, 17, 9, 4),
    "Bottom":  (22, 4, 8, 15, 14, 5, 3, 16, 11, 2),
    "Utility": (14, 3, 8, 13, 12, 26, 10, 5, 4, 2),
    "Jungle":  (18, 4, 8, 15, 14, 7, 4, 12, 4, 14),
}
_SKILLED_KINDS = np.array([k in ("WARD_KILL", "CHAMPION_KILL", "BUILDING_KILL", "ELITE_MONSTER_KILL") for k in _KIND_ORDER])
_CLUMSY_KINDS = np.array([k == "ITEM_SOLD" for k in _KIND_ORDER])

_LANE_ANCHOR = {
    "Top": (1800.0, 12500.0),
    "Mid": (7500.0, 7500.0),
    "Bottom": (12500.0, 1800.0),
    "Utility": (12000.0, 2500.0),
    "Jungle": (6000.0, 9000.0),
}
# about one assister per kill, so kills add as many assists to one team as victims to the other
_ASSIST_PROB = {"Top": 0.15, "Mid": 0.2, "Bottom": 0.2, "Utility": 0.45, "Jungle": 0.3}
_ITEM_COSTS = (300, 350, 400, 450, 800, 900, 1100, 1250, 1300, 2500, 2800, 3000, 3100, 3200, 3400)
_CONSUMABLE_COSTS = (50, 75, 150, 500)

SYNTH_CONSTANTS = MatchConstants.for_version("synthetic")


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_matches: int = 2000
    events_per_player: tuple[int, int] = (40, 120)
    label_flip_probability: float = 0.05
    latent_weights: np.ndarray = field(default_factory=lambda: DEFAULT_LATENT_WEIGHTS.copy())
    skill_spread: float = 1.0
    quality_noise: float = 0.0

    def __post_init__(self):
        if self.n_matches < 1:
            raise ValueError("n_matches must be ≥ 1")
        lo, hi = self.events_per_player
        if lo < 1 or hi < lo:
            raise ValueError("events_per_player must satisfy 1 <= min <= max")
        if not 0 <= self.label_flip_probability < 0.5:
            raise ValueError("label_flip_probability must be in [0, 0.5)")
        if np.shape(self.latent_weights) != (N_FEATURES,):
            raise ValueError("latent_weights must have 30 entries")
        if self.skill_spread < 0 or self.quality_noise < 0:
            raise ValueError("skill_spread and quality_noise must be >= 0")


@dataclass
class GeneratedMatch:
    meta: MatchRecord
    events: list[TimelineEvent]
    frames: list[FrameSnapshot]
    sample: MatchSample
    latent: list[np.ndarray]  # per player, aligned with sample.sequences
    flipped: bool


@dataclass
class LabeledDataset:
    samples: list[MatchSample]
    latent: list[list[np.ndarray]]
    flipped: np.ndarray
    config: GenConfig
    raw: list[GeneratedMatch] | None = None

    def __len__(self) -> int:
        return len(self.samples)


def synthetic_champion_table() -> ChampionRoleTable:
    return ChampionRoleTable.from_csv()


def _clip_xy(xy):
    return tuple(float(np.clip(round(c), 0, MAP_SIZE)) for c in xy)


def _lane_anchor(lane: str, team: str):
    x, y = _LANE_ANCHOR[lane]
    return (x, y) if team == "blue" else (MAP_SIZE - y, MAP_SIZE - x)


def _raw_match(rng: np.random.Generator, index: int, cfg: GenConfig, table: ChampionRoleTable):
    duration = int(rng.integers(20, 41)) * 60_000 + int(rng.integers(0, 60_000))
    champions = list(table)
    players = []
    for team, start in (("blue", 1), ("red", 6)):
        lanes = rng.permutation(LANES)
        for k in range(5):
            champ = champions[int(rng.integers(len(champions)))]
            players.append(Player(start + k, team, champ, str(lanes[k])))
    skill = rng.normal(0.0, cfg.skill_spread, size=10) if cfg.skill_spread > 0 else np.zeros(10)
    team_edge = np.array([skill[:5].mean() - skill[5:].mean()] * 5 + [skill[5:].mean() - skill[:5].mean()] * 5)

    events: list[TimelineEvent] = []
    lo, hi = cfg.events_per_player
    for p in players:
        i = p.participant_id - 1
        rates = np.array(_LANE_KIND_RATES[p.lane], dtype=float)
        rates[_SKILLED_KINDS] *= np.exp(0.5 * (skill[i] + team_edge[i]))
        rates[_CLUMSY_KINDS] *= np.exp(-0.5 * skill[i])
        n = int(rng.integers(lo, hi + 1))
        kinds = rng.choice(len(_KIND_ORDER), size=n, p=rates / rates.sum())
        stamps = np.sort(rng.integers(0, duration + 1, size=n))
        level = 1
        skill_levels = np.zeros(4, dtype=int)
        teammates = [q for q in players if q.team == p.team and q.participant_id != p.participant_id]
        enemies = [q for q in players if q.team != p.team]
        for kind_i, ts in zip(kinds, stamps):
            kind = _KIND_ORDER[kind_i]
            ts = int(ts)
            actor = p.participant_id
            assisting: tuple[int, ...] = ()
            victim = None
            position = None
            if kind == "ITEM_PURCHASED":
                payload = {"cost": int(rng.choice(_ITEM_COSTS))}
            elif kind == "ITEM_DESTROYED":
                payload = {"cost": int(rng.choice(_CONSUMABLE_COSTS))}
            elif kind == "ITEM_SOLD":
                payload = {"sell_value": int(0.7 * rng.choice(_ITEM_COSTS))}
            elif kind == "SKILL_LEVEL_UP":
                slot = int(rng.integers(4))
                top = 3 if slot == 3 else 5
                skill_levels[slot] = min(skill_levels[slot] + 1, top)
                payload = {"skill_level": int(skill_levels[slot]), "max_skill_level": top}
            elif kind == "LEVEL_UP":
                level = min(level + 1, 18)
                payload = {"level": level}
            elif kind in ("WARD_PLACED", "WARD_KILL"):
                payload = {"bounty": int(rng.choice((0, 10, 15, 20, 30)))}
            else:
                helpers = [q.participant_id for q in teammates if rng.random() < _ASSIST_PROB[q.lane]]
                assisting = tuple(sorted(helpers))
                anchor = _lane_anchor(p.lane, p.team) if kind != "ELITE_MONSTER_KILL" else (7500.0, 7500.0)
                position = _clip_xy(np.asarray(anchor) + rng.normal(0, 1500, size=2))
                if kind == "CHAMPION_KILL":
                    vw = np.exp(-0.5 * skill[[q.participant_id - 1 for q in enemies]])
                    victim = enemies[int(rng.choice(5, p=vw / vw.sum()))].participant_id
                    received = float(rng.integers(800, 3000))
                    share = rng.dirichlet(np.ones(1 + len(assisting))) * received * rng.uniform(0.85, 1.0)
                    payload = {
                        "damage_dealt": [int(d) for d in share],
                        "total_damage_received": int(received),
                        "victim_damage_dealt": int(received * rng.uniform(0.0, 1.3)),
                    }
                else:
                    payload = {"involved_players": 1 + len(assisting)}
            events.append(TimelineEvent(ts, kind, actor, assisting, victim, position, payload))
    events.sort(key=lambda e: e.timestamp_ms)

    frames = _frames(rng, players, events, duration, skill)
    meta = MatchRecord(f"SYN-{cfg.seed}-{index:06d}", duration, "blue", tuple(players))
    return meta, events, frames


def _frames(rng, players, events, duration, skill) -> list[FrameSnapshot]:
    n_frames = duration // FRAME_INTERVAL_MS + 1
    times = np.arange(n_frames) * FRAME_INTERVAL_MS
    minutes = duration / 60_000
    kills = np.zeros(10)
    assists = np.zeros(10)
    objectives = np.zeros(10)
    level_at = [[(0, 1)] for _ in range(10)]
    for ev in events:
        a = ev.actor - 1
        if ev.kind == "CHAMPION_KILL":
            kills[a] += 1
            for q in ev.assisting:
                assists[q - 1] += 1
        elif ev.kind in ("BUILDING_KILL", "ELITE_MONSTER_KILL"):
            for q in (ev.actor,) + ev.assisting:
                objectives[q - 1] += 1.0 / (1 + len(ev.assisting))
        elif ev.kind == "LEVEL_UP":
            level_at[a].append((ev.timestamp_ms, ev.payload["level"]))

    lane_cs = {"Top": 6.5, "Mid": 7.0, "Bottom": 7.5, "Utility": 1.2, "Jungle": 1.0}
    creep = np.zeros(10, dtype=int)
    jungle = np.zeros(10, dtype=int)
    for p in players:
        i = p.participant_id - 1
        rate = lane_cs[p.lane] * np.exp(0.1 * skill[i] + rng.normal(0, 0.3))
        creep[i] = int(rate * minutes)
        if p.lane == "Jungle":
            jungle[i] = int(5.5 * minutes * np.exp(0.1 * skill[i] + rng.normal(0, 0.3)))
    gold = (
        500 + 110 * minutes + 20 * (creep + jungle) + 300 * kills + 150 * assists + 250 * objectives
        + rng.normal(0, 1500, size=10)
    )
    gold = np.maximum(gold, 500).astype(int)

    frames = []
    for f, t in enumerate(times):
        frac = t / duration if duration else 1.0
        recs = {}
        for p in players:
            i = p.participant_id - 1
            anchor = np.asarray(_lane_anchor(p.lane, p.team))
            pos = (0.0, 0.0) if f == 0 and p.team == "blue" else (MAP_SIZE, MAP_SIZE) if f == 0 else _clip_xy(anchor + rng.normal(0, 1500, size=2))
            lvl = max(lv for ts, lv in level_at[i] if ts <= t)
            recs[p.participant_id] = PlayerFrame(
                position=tuple(float(c) for c in pos),
                total_gold=int(500 + (gold[i] - 500) * frac),
                minions_killed=int(creep[i] * frac),
                jungle_minions_killed=int(jungle[i] * frac),
                level=int(lvl),
            )
        frames.append(FrameSnapshot(int(t), recs))
    # final frame carries the end-of-match totals
    last = frames[-1].players
    for p in players:
        i = p.participant_id - 1
        pf = last[p.participant_id]
        last[p.participant_id] = replace(pf, total_gold=int(gold[i]), minions_killed=int(creep[i]), jungle_minions_killed=int(jungle[i]))
    return frames


def generate_matches(
    config: GenConfig, table: ChampionRoleTable | None = None, start: int = 0, stop: int | None = None
) -> Iterator[GeneratedMatch]:
    """Yield matches ``start..stop`` of the corpus described by ``config``."""
    table = table if table is not None else synthetic_champion_table()
    stop = config.n_matches if stop is None else stop
    w = np.asarray(config.latent_weights, dtype=float)
    for index in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
        meta, events, frames = _raw_match(rng, index, config, table)
        sample = build_match_sample(meta, events, frames, table, SYNTH_CONSTANTS)
        latent = [seq @ w for seq in sample.sequences]
        gap = sum(v.sum() for v in latent[:5]) - sum(v.sum() for v in latent[5:])
        if config.quality_noise > 0:
            gap += rng.normal(0, config.quality_noise)
        winner = "blue" if gap > 0 else "red"
        flipped = bool(rng.random() < config.label_flip_probability)
        if flipped:
            winner = "red" if winner == "blue" else "blue"
        meta = replace(meta, winner=winner)
        sample.winner = winner
        yield GeneratedMatch(meta, events, frames, sample, latent, flipped)


def generate(config: GenConfig, keep_raw: bool = False, table: ChampionRoleTable | None = None) -> LabeledDataset:
    samples, latent, flipped, raw = [], [], [], []
    for gm in generate_matches(config, table):
        samples.append(gm.sample)
        latent.append(gm.latent)
        flipped.append(gm.flipped)
        if keep_raw:
            raw.append(gm)
    return LabeledDataset(samples, latent, np.array(flipped), config, raw if keep_raw else None)


def subset(ds: LabeledDataset, idx) -> LabeledDataset:
    idx = list(idx)
    return LabeledDataset(
        [ds.samples[i] for i in idx],
        [ds.latent[i] for i in idx],
        ds.flipped[idx],
        ds.config,
        [ds.raw[i] for i in idx] if ds.raw is not None else None,
    )


@dataclass
class OracleReport:
    spearman: float
    accuracy: float
    bayes_ceiling: float
    n_actions: int


def oracle_scores(ds: LabeledDataset, ens) -> OracleReport:
    """Pooled Spearman between learned action scores and latent values, plus accuracy."""
    from .scoring_model import discern, score_match

    learned, truth = [], []
    correct = 0
    for sample, latent in zip(ds.samples, ds.latent):
        outcome = sample.winner if ens.variant.needs_outcome else None
        rep = score_match(ens, sample, outcome)
        for s, v in zip(rep.scores, latent):
            learned.append(s)
            truth.append(v)
        pred, _, _ = discern(rep.s_blue, rep.s_red, ens.variant.discern_method)
        correct += pred == sample.winner
    learned = np.concatenate(learned)
    truth = np.concatenate(truth)
    rho = float(spearmanr(learned, truth)[0]) if learned.size > 1 else float("nan")
    return OracleReport(rho, correct / len(ds), 1.0 - ds.config.label_flip_probability, int(learned.size))
