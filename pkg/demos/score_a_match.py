"""Generate a small synthetic corpus, train the default model briefly and
print the highest and lowest scored actions of one held-out match.

    python demos/score_a_match.py
"""

import numpy as np

from actscore.scoring_model import Ensemble, score_match, train
from actscore.synth import GenConfig, generate

ds = generate(GenConfig(seed=1, n_matches=120, events_per_player=(20, 40)))
train_set, val_set, held_out = ds.samples[:100], ds.samples[100:110], ds.samples[110]

ens, history = train(Ensemble.initialize(1, seed=0), train_set, val_set, epochs=3, lr=1e-3)
for h in history:
    print(f"epoch {h['epoch']}: loss {h['train_loss']:.4f}, validation accuracy {h['val_accuracy']:.2f}")

rep = score_match(ens, held_out)
rows = [
    (float(s), p + 1, ts, kind, float(v))
    for p in range(10)
    for (ts, kind), s, v in zip(held_out.actions[p], rep.scores[p], ds.latent[110][p])
]
rows.sort()
print(f"\nmatch {held_out.match_id}: winner {held_out.winner}, blue {rep.s_blue:+.3f}, red {rep.s_red:+.3f}")
print(f"{'score':>8}  {'player':>6}  {'time (s)':>8}  {'kind':<26}  latent")
for s, pid, ts, kind, v in rows[:5] + rows[-5:]:
    print(f"{s:+8.4f}  {pid:>6}  {ts / 1000:8.0f}  {kind:<26}  {v:+.3f}")
print("\nplayer totals:", np.round(rep.totals, 3))
