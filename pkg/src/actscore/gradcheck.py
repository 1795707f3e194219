"""Finite-difference verification of every variant's end-to-end match loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .featurizer import N_FEATURES, N_PLAYERS
from .neural_core import finite_diff_check
from .scoring_model import (
    VARIANTS,
    Ensemble,
    PackedMatch,
    _forward,
    match_loss_and_grads,
    team_totals,
)

TOLERANCE = 1e-5


@dataclass
class GradcheckResult:
    variant_id: int
    max_rel_err: float
    n_steps: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err < TOLERANCE


def random_instance(variant_id: int, rng: np.random.Generator, max_len: int = 8, hidden: int = 15, layers: int = 2):
    """A random ensemble (slots deliberately different) and a random padded match.

    The winner is chosen so the ReLU loss is active, keeping the check away
    from the hinge.
    """
    ens = Ensemble.initialize(variant_id, int(rng.integers(2**31)), hidden, layers)
    for v in ens.params.values():
        v += rng.normal(0, 0.1, size=v.shape)
    reversed_order = VARIANTS[variant_id].sequence_order == "reversed"
    for _ in range(100):
        lengths = rng.integers(1, max_len + 1, size=N_PLAYERS)
        x = np.zeros((N_PLAYERS, int(lengths.max()), N_FEATURES))
        for p in range(N_PLAYERS):
            x[p, : lengths[p]] = rng.random((lengths[p], N_FEATURES))
        # the outcome-encoded variants see the winner in h0, so score under each choice
        for winner in ("blue", "red"):
            pm = PackedMatch(x, lengths, reversed_order, winner)
            s_b, s_r = team_totals(_forward(ens, pm, winner)[0])
            s_w, s_l = (s_b, s_r) if winner == "blue" else (s_r, s_b)
            if s_l - s_w > 1e-3:
                return ens, pm
    raise RuntimeError("could not draw an instance with an active ReLU loss")


def check_variant(variant_id: int, seed: int = 0, max_per_param: int = 40, perturb: float = 0.0) -> GradcheckResult:
    rng = np.random.default_rng([seed, variant_id])
    ens, pm = random_instance(variant_id, rng)

    def loss_fn(params):
        ens.params = params
        loss, grads = match_loss_and_grads(ens, pm)
        if perturb:
            grads = {k: g * (1.0 + perturb) if i == 0 else g for i, (k, g) in enumerate(grads.items())}
        return loss, grads

    err = finite_diff_check(loss_fn, ens.params, 1e-6, max_per_param, rng)
    return GradcheckResult(variant_id, err, int(pm.lengths.max()))


def check_all(seed: int = 0, max_per_param: int = 40, perturb: float = 0.0) -> list[GradcheckResult]:
    return [check_variant(v, seed, max_per_param, perturb) for v in sorted(VARIANTS)]
