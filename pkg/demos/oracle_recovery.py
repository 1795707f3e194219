"""Train the default model on the default 2,000-match synthetic corpus and
compare it with the latent action values and the common-metric baselines.

Takes several minutes on one CPU core.

    python demos/oracle_recovery.py
"""

import logging
import time

from actscore.cli import split_indices
from actscore.evaluation import baseline_eval
from actscore.scoring_model import Ensemble, train
from actscore.synth import GenConfig, generate, oracle_scores, subset

logging.basicConfig(level=logging.INFO, format="%(message)s")

t0 = time.perf_counter()
ds = generate(GenConfig(seed=0, n_matches=2000))
tr, va, te = split_indices(len(ds), seed=0)
print(f"generated {len(ds)} matches in {time.perf_counter() - t0:.0f} s")

ens, _ = train(Ensemble.initialize(1, seed=0), [ds.samples[i] for i in tr], [ds.samples[i] for i in va])
rep = oracle_scores(subset(ds, te), ens)
print(f"held-out accuracy {rep.accuracy:.4f} (ceiling {rep.bayes_ceiling:.2f})")
print(f"Spearman between action scores and latent values {rep.spearman:+.4f} over {rep.n_actions} actions")
for metric in ("kda", "gold", "creep"):
    print(f"baseline {metric:<5} accuracy {baseline_eval([ds.samples[i] for i in te], metric).accuracy:.4f}")
print(f"total {time.perf_counter() - t0:.0f} s")
