"""Analysis suite: discernment metrics, baselines, rank comparison, misestimates, PCA."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .featurizer import N_PLAYERS, MatchSample
from .match_data import LANES
from .scoring_model import Ensemble, ScoreReport, discern, score_match

METRICS = ("kda", "gold", "creep", "average")


@dataclass
class DiscernmentMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tie_count: int
    n_matches: int
    label_leakage: bool = False


def metrics_from_predictions(predicted, actual, ties: int = 0, label_leakage: bool = False) -> DiscernmentMetrics:
    """Accuracy/precision/recall/F1 with "blue wins" as the positive class."""
    pred = np.asarray(predicted) == "blue"
    true = np.asarray(actual) == "blue"
    n = len(true)
    if n == 0:
        raise ValueError("cannot evaluate an empty dataset")
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return DiscernmentMetrics(float(np.mean(pred == true)), precision, recall, f1, ties, n, label_leakage)


def score_dataset(ens: Ensemble, dataset: list[MatchSample]) -> list[ScoreReport]:
    """Score every match. Outcome-encoded variants are handed the true winner (label leakage)."""
    leak = ens.variant.needs_outcome
    return [score_match(ens, s, s.winner if leak else None) for s in dataset]


def discernment_eval(ens: Ensemble, dataset: list[MatchSample], reports=None) -> DiscernmentMetrics:
    if not dataset:
        raise ValueError("cannot evaluate an empty dataset")
    reports = reports if reports is not None else score_dataset(ens, dataset)
    preds, ties = [], 0
    for rep in reports:
        winner, _, tie = discern(rep.s_blue, rep.s_red, ens.variant.discern_method)
        preds.append(winner)
        ties += tie
    return metrics_from_predictions(preds, [s.winner for s in dataset], ties, ens.variant.needs_outcome)


def baseline_eval(dataset: list[MatchSample], metric: str) -> DiscernmentMetrics:
    """Predict the team with the larger summed per-player metric (ties -> red)."""
    preds, ties = [], 0
    for s in dataset:
        v = s.baseline[metric]
        b, r = float(v[:5].sum()), float(v[5:].sum())
        preds.append("blue" if b > r else "red")
        ties += b == r
    return metrics_from_predictions(preds, [s.winner for s in dataset], ties)


# --------------------------------------------------------------------------
# rankings


def rank_players(values) -> np.ndarray:
    """Ranks 1..10, 1 = highest value; equal values ordered by participant id."""
    values = np.asarray(values, dtype=float)
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    ranks = np.empty(len(values), dtype=int)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def metric_ranks(sample: MatchSample, metric: str) -> np.ndarray:
    if metric == "average":
        avg = np.mean([rank_players(sample.baseline[m]) for m in ("kda", "gold", "creep")], axis=0)
        return rank_players(-avg)
    return rank_players(sample.baseline[metric])


@dataclass
class RankingComparison:
    metric: str
    counts: np.ndarray  # counts[metric_rank - 1, model_rank - 1]
    spearman: float
    n_matches: int


def compare_ranks(metric_rank_rows, model_rank_rows, metric: str = "") -> RankingComparison:
    counts = np.zeros((N_PLAYERS, N_PLAYERS), dtype=int)
    a = np.asarray(metric_rank_rows).reshape(-1)
    b = np.asarray(model_rank_rows).reshape(-1)
    np.add.at(counts, (a - 1, b - 1), 1)
    rho = float(spearmanr(a, b)[0]) if a.size > 1 else float("nan")
    return RankingComparison(metric, counts, rho, len(a) // N_PLAYERS)


def ranking_comparison(ens: Ensemble, dataset: list[MatchSample], metric: str, reports=None) -> RankingComparison:
    reports = reports if reports is not None else score_dataset(ens, dataset)
    metric_rows = [metric_ranks(s, metric) for s in dataset]
    model_rows = [rank_players(rep.totals) for rep in reports]
    return compare_ranks(metric_rows, model_rows, metric)


@dataclass
class MisestimateReport:
    metric: str
    threshold: int
    under: dict = field(default_factory=lambda: dict.fromkeys(LANES, 0))
    over: dict = field(default_factory=lambda: dict.fromkeys(LANES, 0))


def classify_misestimate(metric_rank: int, model_rank: int, threshold: int = 5) -> str | None:
    """'under' when the model ranks the player more than ``threshold`` places
    above the metric, 'over' for the reverse, else None."""
    if metric_rank - model_rank > threshold:
        return "under"
    if model_rank - metric_rank > threshold:
        return "over"
    return None


def misestimates(ens: Ensemble, dataset: list[MatchSample], metric: str, threshold: int = 5, reports=None) -> MisestimateReport:
    reports = reports if reports is not None else score_dataset(ens, dataset)
    out = MisestimateReport(metric, threshold)
    for sample, rep in zip(dataset, reports):
        m_ranks = metric_ranks(sample, metric)
        s_ranks = rank_players(rep.totals)
        for p in range(N_PLAYERS):
            kind = classify_misestimate(m_ranks[p], s_ranks[p], threshold)
            if kind is not None:
                getattr(out, kind)[sample.lanes[p]] += 1
    return out


# --------------------------------------------------------------------------
# PCA


def first_principal_component(X: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000):
    """Leading eigenvector of the covariance of ``X`` by power iteration.

    Returns ``(direction, mean)``. The sign is fixed so the largest-magnitude
    loading is positive. A zero covariance yields the first basis vector.
    """
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    Xc = X - mean
    C = Xc.T @ Xc / max(len(X) - 1, 1)
    d = C.shape[0]
    # identical rows still leave round-off residue from the mean
    scale = max(1.0, float(np.abs(X).max())) if X.size else 1.0
    if np.trace(C) <= d * (1e-12 * scale) ** 2:
        e = np.zeros(d)
        e[0] = 1.0
        return e, mean
    v = C[np.argmax(np.linalg.norm(C, axis=0))].copy()
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = C @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        w /= norm
        if w @ v < 0:
            w = -w
        done = np.linalg.norm(w - v) < tol
        v = w
        if done:
            break
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v, mean


@dataclass
class PcaStudy:
    component: np.ndarray
    mean: np.ndarray
    projection: np.ndarray
    scores: np.ndarray
    won: np.ndarray
    bin_edges: np.ndarray
    mean_win: np.ndarray
    mean_lose: np.ndarray
    n_win: np.ndarray
    n_lose: np.ndarray
    divergence: float


def pca_from_actions(X: np.ndarray, scores: np.ndarray, won: np.ndarray, bins: int = 50) -> PcaStudy:
    if len(X) < 2:
        raise ValueError("PCA study needs at least 2 actions")
    comp, mean = first_principal_component(X)
    proj = (X - mean) @ comp
    lo, hi = float(proj.min()), float(proj.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.clip(np.searchsorted(edges, proj, side="right") - 1, 0, bins - 1)
    n_win = np.bincount(idx[won], minlength=bins)
    n_lose = np.bincount(idx[~won], minlength=bins)
    sum_win = np.bincount(idx[won], weights=scores[won], minlength=bins)
    sum_lose = np.bincount(idx[~won], weights=scores[~won], minlength=bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_win = np.where(n_win > 0, sum_win / np.maximum(n_win, 1), np.nan)
        mean_lose = np.where(n_lose > 0, sum_lose / np.maximum(n_lose, 1), np.nan)
    both = (n_win > 0) & (n_lose > 0)
    divergence = float(np.mean(np.abs(mean_win[both] - mean_lose[both]))) if both.any() else float("nan")
    return PcaStudy(comp, mean, proj, scores, won, edges, mean_win, mean_lose, n_win, n_lose, divergence)


def pca_study(ens: Ensemble, dataset: list[MatchSample], reports=None, bins: int = 50) -> PcaStudy:
    """Project every action onto the first principal component and compare
    winners' and losers' scores bin by bin."""
    reports = reports if reports is not None else score_dataset(ens, dataset)
    X, S, W = [], [], []
    for sample, rep in zip(dataset, reports):
        for p in range(N_PLAYERS):
            if len(sample.sequences[p]) == 0:
                continue
            X.append(sample.sequences[p])
            S.append(rep.scores[p])
            team_won = (p < 5) == (sample.winner == "blue")
            W.append(np.full(len(rep.scores[p]), team_won))
    if not X:
        raise ValueError("PCA study needs at least 2 actions")
    return pca_from_actions(np.concatenate(X), np.concatenate(S), np.concatenate(W), bins)


# --------------------------------------------------------------------------
# full run and report files


@dataclass
class EvaluationResults:
    discernment: dict = field(default_factory=dict)  # row name -> DiscernmentMetrics
    rankings: dict = field(default_factory=dict)  # metric -> RankingComparison
    misestimates: dict = field(default_factory=dict)  # metric -> MisestimateReport
    pca: PcaStudy | None = None


def evaluate(ens: Ensemble, dataset: list[MatchSample], threshold: int = 5, name: str | None = None) -> EvaluationResults:
    reports = score_dataset(ens, dataset)
    res = EvaluationResults()
    res.discernment[name or f"model{ens.variant.variant_id}"] = discernment_eval(ens, dataset, reports)
    for m in ("kda", "gold", "creep"):
        res.discernment[f"baseline_{m}"] = baseline_eval(dataset, m)
    for m in METRICS:
        res.rankings[m] = ranking_comparison(ens, dataset, m, reports)
        res.misestimates[m] = misestimates(ens, dataset, m, threshold, reports)
    res.pca = pca_study(ens, dataset, reports)
    return res


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return f"{float(x):.10g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def emit_report(results: EvaluationResults, out_dir: str | Path) -> list[Path]:
    """Write CSV tables and a text summary; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "discernment.csv"
    _write_csv(
        path,
        ("model", "accuracy", "precision", "recall", "f1", "ties"),
        [(name, m.accuracy, m.precision, m.recall, m.f1, m.tie_count) for name, m in results.discernment.items()],
    )
    written.append(path)

    for metric in METRICS:
        rc = results.rankings.get(metric)
        rows = []
        if rc is not None:
            rows = [(i + 1, j + 1, int(rc.counts[i, j])) for i in range(N_PLAYERS) for j in range(N_PLAYERS)]
        path = out / f"heatmap_{metric}.csv"
        _write_csv(path, ("metric_rank", "model_rank", "count"), rows)
        written.append(path)

        me = results.misestimates.get(metric)
        rows = [(lane, me.under[lane], me.over[lane]) for lane in LANES] if me is not None else []
        path = out / f"misestimates_{metric}.csv"
        _write_csv(path, ("lane", "under", "over"), rows)
        written.append(path)

    pca = results.pca
    rows = []
    if pca is not None:
        rows = [
            (pca.bin_edges[i], pca.bin_edges[i + 1], pca.mean_win[i], pca.mean_lose[i], pca.n_win[i], pca.n_lose[i])
            for i in range(len(pca.n_win))
        ]
    path = out / "pca_curves.csv"
    _write_csv(path, ("bin_low", "bin_high", "mean_win", "mean_lose", "n_win", "n_lose"), rows)
    written.append(path)

    lines = ["Discernment"]
    for name, m in results.discernment.items():
        flag = "  (outcome supplied as input)" if m.label_leakage else ""
        lines.append(
            f"  {name:<16} acc={m.accuracy:.4f} prec={m.precision:.4f} rec={m.recall:.4f} "
            f"f1={m.f1:.4f} ties={m.tie_count} n={m.n_matches}{flag}"
        )
    if results.rankings:
        lines.append("Rank agreement (Spearman, model vs metric)")
        for metric, rc in results.rankings.items():
            lines.append(f"  {metric:<8} {rc.spearman:+.4f}")
    if results.misestimates:
        lines.append("Under/over-estimated players by lane")
        for metric, me in results.misestimates.items():
            cells = ", ".join(f"{lane}={me.under[lane]}/{me.over[lane]}" for lane in LANES)
            lines.append(f"  {metric:<8} (>{me.threshold} places) {cells}")
    if pca is not None:
        lines.append(f"PCA winner/loser divergence: {_fmt(pca.divergence)}")
    path = out / "summary.txt"
    path.write_text("\n".join(lines) + "\n")
    written.append(path)
    return written
