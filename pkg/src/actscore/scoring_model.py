"""Ten per-player scoring submodels, team-level discernment, losses and training."""

from __future__ import annotations

import copy
import io
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .featurizer import N_FEATURES, N_PLAYERS, MatchSample
from .neural_core import (
    AdamState,
    adam_step,
    gru_backward,
    gru_forward,
    init_gru,
    init_mlp,
    init_slp,
    mlp_backward,
    mlp_forward,
    slp_backward,
    slp_forward,
)

log = logging.getLogger(__name__)

GRU_SLP = "GRU_SLP"
MLP = "MLP"
RELU = "RELU"
BCE = "BCE"


@dataclass(frozen=True)
class VariantConfig:
    variant_id: int
    encoder: str
    sequence_order: str | None
    h0_policy: str | None
    loss_pair: str

    @classmethod
    def from_id(cls, variant_id: int) -> "VariantConfig":
        try:
            return VARIANTS[variant_id]
        except KeyError:
            raise ValueError(f"variant must be 1..7, got {variant_id}") from None

    @property
    def discern_method(self) -> str:
        return "deterministic" if self.loss_pair == RELU else "confidence"

    @property
    def needs_outcome(self) -> bool:
        return self.h0_policy == "outcome_encoded"


VARIANTS = {
    1: VariantConfig(1, GRU_SLP, "reversed", "zeros", RELU),
    2: VariantConfig(2, GRU_SLP, "reversed", "outcome_encoded", RELU),
    3: VariantConfig(3, GRU_SLP, "chronological", "zeros", RELU),
    4: VariantConfig(4, GRU_SLP, "reversed", "zeros", BCE),
    5: VariantConfig(5, GRU_SLP, "reversed", "outcome_encoded", BCE),
    6: VariantConfig(6, MLP, None, None, RELU),
    7: VariantConfig(7, MLP, None, None, BCE),
}


# --------------------------------------------------------------------------
# discernment and losses (functions of the two team totals)


def confidence(s_blue: float, s_red: float) -> float:
    """Probability that blue wins: logistic of the score gap."""
    d = s_blue - s_red
    return float(math.exp(-np.logaddexp(0.0, -d)))


def bce_loss(s_blue: float, s_red: float, winner: str) -> tuple[float, float, float]:
    """Binary cross-entropy of the blue-win confidence; returns (loss, dL/dS_B, dL/dS_R)."""
    d = s_blue - s_red
    q = 1.0 if winner == "blue" else 0.0
    loss = q * np.logaddexp(0.0, -d) + (1.0 - q) * np.logaddexp(0.0, d)
    g = confidence(s_blue, s_red) - q
    return float(loss), g, -g


def relu_loss(s_blue: float, s_red: float, winner: str) -> tuple[float, float, float]:
    """max(0, S_loser - S_winner); returns (loss, dL/dS_B, dL/dS_R). Zero gradient at a tie."""
    s_w, s_l = (s_blue, s_red) if winner == "blue" else (s_red, s_blue)
    if s_l <= s_w:
        return 0.0, 0.0, 0.0
    if winner == "blue":
        return s_l - s_w, -1.0, 1.0
    return s_l - s_w, 1.0, -1.0


def discern(s_blue: float, s_red: float, method: str = "deterministic"):
    """Predicted winner, confidence (None for the deterministic method) and a tie flag.

    Exact ties go to red.
    """
    tie = s_blue == s_red
    if method == "deterministic":
        return ("blue" if s_blue > s_red else "red"), None, tie
    if method == "confidence":
        c = confidence(s_blue, s_red)
        # c > 0.5 exactly when the gap is positive; compare the gap so sub-ulp gaps are not lost
        return ("blue" if s_blue > s_red else "red"), c, tie
    raise ValueError(f"unknown discernment method {method!r}")


LOSSES = {RELU: relu_loss, BCE: bce_loss}


# --------------------------------------------------------------------------
# ensemble


@dataclass
class Ensemble:
    """Ten submodels stored as stacked arrays (leading axis = player slot 0..9)."""

    variant: VariantConfig
    params: dict
    hidden: int = 15
    layers: int = 2
    lr: float = 1e-4
    epochs: int = 10
    adam: AdamState = field(default_factory=AdamState, repr=False)

    @classmethod
    def initialize(
        cls, variant: int | VariantConfig, seed: int = 0, hidden: int = 15, layers: int = 2,
        lr: float = 1e-4, epochs: int = 10,
    ) -> "Ensemble":
        """One seeded uniform(+-1/sqrt(fan_in)) draw, replicated to all ten slots."""
        if isinstance(variant, int):
            variant = VariantConfig.from_id(variant)
        rng = np.random.default_rng(seed)
        if variant.encoder == GRU_SLP:
            one = init_gru(rng, 1, N_FEATURES, hidden, layers)
            one.update(init_slp(rng, 1, hidden))
        else:
            one = init_mlp(rng, 1, (N_FEATURES, hidden, hidden, 1))
        params = {k: np.repeat(v, N_PLAYERS, axis=0) for k, v in one.items()}
        return cls(variant, params, hidden, layers, lr, epochs)

    def copy(self) -> "Ensemble":
        return copy.deepcopy(self)

    def submodel(self, slot: int) -> dict:
        """Parameters of player slot ``slot`` (1..10), without the slot axis."""
        return {k: v[slot - 1] for k, v in self.params.items()}

    def spread(self) -> float:
        """Largest L-inf distance between any submodel and submodel 1."""
        return max(float(np.max(np.abs(v - v[:1]))) for v in self.params.values())

    def average(self) -> None:
        for v in self.params.values():
            # mean of offsets from slot 1, so already-identical slots stay bit-identical
            v[:] = v[:1] + (v - v[:1]).mean(axis=0, keepdims=True)


@dataclass
class PackedMatch:
    """A match laid out for one batched pass: sequences padded at the end."""

    x: np.ndarray  # (10, T, 30) in processing order
    lengths: np.ndarray  # (10,)
    reversed_order: bool
    winner: str

    @property
    def mask(self) -> np.ndarray:
        return np.arange(self.x.shape[1])[None, :] < self.lengths[:, None]


def pack(sample: MatchSample, variant: VariantConfig) -> PackedMatch:
    rev = variant.encoder == GRU_SLP and variant.sequence_order == "reversed"
    lengths = np.array([len(s) for s in sample.sequences])
    x = np.zeros((N_PLAYERS, int(lengths.max(initial=0)), N_FEATURES))
    for p, seq in enumerate(sample.sequences):
        if len(seq):
            x[p, : len(seq)] = seq[::-1] if rev else seq
    return PackedMatch(x, lengths, rev, sample.winner)


def _h0(ens: Ensemble, outcome: str | None) -> np.ndarray:
    h0 = np.zeros((ens.layers, N_PLAYERS, ens.hidden))
    if ens.variant.needs_outcome:
        if outcome not in ("blue", "red"):
            raise ValueError(
                f"variant {ens.variant.variant_id} encodes the match outcome in h0; "
                "the true winner must be supplied"
            )
        winners = slice(0, 5) if outcome == "blue" else slice(5, 10)
        h0[:, winners] = 1.0
    return h0


def _forward(ens: Ensemble, pm: PackedMatch, outcome: str | None):
    """Per-step scores (10, T), zeroed on padding, plus a backward cache."""
    if pm.x.shape[1] == 0:
        return np.zeros((N_PLAYERS, 0)), None
    if ens.variant.encoder == GRU_SLP:
        states, gcache = gru_forward(ens.params, pm.x, _h0(ens, outcome))
        s, scache = slp_forward(ens.params, states[-1])
        cache = (gcache, scache)
    else:
        s, cache = mlp_forward(ens.params, pm.x)
    return s * pm.mask, cache


def _backward(ens: Ensemble, cache, d_s: np.ndarray) -> dict:
    if ens.variant.encoder == GRU_SLP:
        gcache, scache = cache
        grads, d_h = slp_backward(scache, d_s)
        g, _ = gru_backward(gcache, d_h)
        grads.update(g)
        return grads
    grads, _ = mlp_backward(cache, d_s)
    return grads


def team_totals(step_scores: np.ndarray) -> tuple[float, float]:
    per_player = step_scores.sum(axis=1)
    return float(per_player[:5].sum()), float(per_player[5:].sum())


def match_loss_and_grads(ens: Ensemble, pm: PackedMatch, outcome: str | None = None):
    """Composite loss of one match and its gradient for every stacked parameter."""
    s, cache = _forward(ens, pm, outcome if outcome is not None else pm.winner)
    s_b, s_r = team_totals(s)
    loss, g_b, g_r = LOSSES[ens.variant.loss_pair](s_b, s_r, pm.winner)
    if cache is None:
        return loss, {k: np.zeros_like(v) for k, v in ens.params.items()}
    d_s = np.where(np.arange(N_PLAYERS)[:, None] < 5, g_b, g_r) * pm.mask
    return loss, _backward(ens, cache, d_s)


@dataclass
class ScoreReport:
    scores: list[np.ndarray]  # per player, chronological
    totals: np.ndarray  # (10,)
    s_blue: float
    s_red: float


def score_packed(ens: Ensemble, pm: PackedMatch, outcome: str | None = None) -> ScoreReport:
    s, _ = _forward(ens, pm, outcome)
    scores = []
    for p in range(N_PLAYERS):
        row = s[p, : pm.lengths[p]]
        scores.append(row[::-1].copy() if pm.reversed_order else row.copy())
    totals = np.array([r.sum() for r in scores])
    return ScoreReport(scores, totals, float(totals[:5].sum()), float(totals[5:].sum()))


def score_match(ens: Ensemble, sample: MatchSample, known_outcome: str | None = None) -> ScoreReport:
    """Score every action of a match; scores come back in chronological order.

    Variants that encode the outcome in h0 require ``known_outcome``.
    """
    return score_packed(ens, pack(sample, ens.variant), known_outcome)


def train_match(ens: Ensemble, pm: PackedMatch | MatchSample) -> float:
    """One step: score, loss, per-submodel Adam update, then parameter averaging."""
    if isinstance(pm, MatchSample):
        pm = pack(pm, ens.variant)
    loss, grads = match_loss_and_grads(ens, pm)
    adam_step(ens.params, grads, ens.adam, ens.lr)
    ens.average()
    return loss


def discernment_accuracy(ens: Ensemble, packed: list[PackedMatch]) -> float:
    method = ens.variant.discern_method
    correct = 0
    for pm in packed:
        rep = score_packed(ens, pm, pm.winner if ens.variant.needs_outcome else None)
        pred, _, _ = discern(rep.s_blue, rep.s_red, method)
        correct += pred == pm.winner
    return correct / len(packed)


def train(
    ens: Ensemble,
    train_set: list[MatchSample],
    val_set: list[MatchSample],
    epochs: int | None = None,
    lr: float | None = None,
    seed: int = 0,
):
    """Epoch loop with seeded shuffling; keeps the epoch with the best validation accuracy.

    Returns ``(best_ensemble, history)`` where history holds one dict per epoch.
    """
    if not train_set or not val_set:
        raise ValueError("training and validation sets must be non-empty")
    ens = ens.copy()
    if epochs is not None:
        ens.epochs = epochs
    if lr is not None:
        ens.lr = lr
    train_packed = [pack(s, ens.variant) for s in train_set]
    val_packed = [pack(s, ens.variant) for s in val_set]
    rng = np.random.default_rng(seed)
    best, best_acc = ens.copy(), -1.0
    history = []
    for epoch in range(1, ens.epochs + 1):
        order = rng.permutation(len(train_packed))
        total = 0.0
        for i in order:
            total += train_match(ens, train_packed[i])
        acc = discernment_accuracy(ens, val_packed)
        history.append({"epoch": epoch, "train_loss": total / len(order), "val_accuracy": acc})
        log.info("epoch %d loss %.6f val_acc %.4f", epoch, total / len(order), acc)
        if acc > best_acc:
            best, best_acc = ens.copy(), acc
    return best, history


# --------------------------------------------------------------------------
# checkpoints

MAGIC = b"A2S1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIBHH")


class CheckpointError(ValueError):
    pass


def _as_matrix(name: str, a: np.ndarray) -> np.ndarray:
    if a.ndim == 2:
        return a
    if a.ndim == 1:
        return a[None, :]
    if a.ndim == 0:
        return a.reshape(1, 1)
    raise CheckpointError(f"{name}: cannot store {a.ndim}-d array")


def checkpoint_bytes(ens: Ensemble) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, FORMAT_VERSION, ens.variant.variant_id, ens.hidden, ens.layers))

    def block(name: str, m: np.ndarray):
        raw = name.encode()
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<II", *m.shape))
        buf.write(np.ascontiguousarray(m, dtype="<f8").tobytes())

    block("hyper", np.array([[ens.lr, float(ens.epochs)]]))
    for slot in range(N_PLAYERS):
        for name in sorted(ens.params):
            full = f"slot{slot + 1:02d}.{name}"
            block(full, _as_matrix(full, ens.params[name][slot]))
    return buf.getvalue()


def save_checkpoint(ens: Ensemble, path: str | Path) -> None:
    Path(path).write_bytes(checkpoint_bytes(ens))


def load_checkpoint(path: str | Path) -> Ensemble:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError("truncated header")
    magic, version, variant_id, hidden, layers = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {version}")
    off = _HEADER.size
    blocks = {}
    while off < len(data):
        try:
            (n,) = struct.unpack_from("<I", data, off)
            name = data[off + 4 : off + 4 + n].decode()
            off += 4 + n
            rows, cols = struct.unpack_from("<II", data, off)
            off += 8
        except (struct.error, UnicodeDecodeError):
            raise CheckpointError("truncated block header") from None
        size = rows * cols * 8
        if off + size > len(data):
            raise CheckpointError(f"truncated data in block {name!r}")
        blocks[name] = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols).astype(float)
        off += size

    try:
        ens = Ensemble.initialize(variant_id, 0, hidden, layers)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from None
    hyper = blocks.pop("hyper", None)
    if hyper is None or hyper.shape != (1, 2):
        raise CheckpointError("missing or malformed 'hyper' block")
    ens.lr, ens.epochs = float(hyper[0, 0]), int(hyper[0, 1])
    for name, arr in ens.params.items():
        for slot in range(N_PLAYERS):
            full = f"slot{slot + 1:02d}.{name}"
            m = blocks.pop(full, None)
            expect = _as_matrix(full, arr[slot]).shape
            if m is None:
                raise CheckpointError(f"missing block {full!r}")
            if m.shape != expect:
                raise CheckpointError(f"{full}: shape {m.shape}, expected {expect}")
            arr[slot] = m.reshape(arr[slot].shape)
    if blocks:
        raise CheckpointError(f"unexpected blocks: {sorted(blocks)[:3]}")
    return ens
