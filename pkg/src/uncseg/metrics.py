"""Segmentation scoring: optimal segment matching, object-size-normalized
precision/recall/F, and pixel-wise precision/recall/F.

Per-segment scores are averaged over segments rather than pixels, so a
missed cup costs as much as a missed monitor. The normalizations:

    P_n = sum_i P_i / N_s
    R_n = sum_i R_i / N_g
    F_n = sum_i F_i / max(N_s, N_g)

where the sums run over matched (prediction, ground-truth) pairs, N_s and
N_g count predicted and true segments, and the matching is the injective
assignment maximizing the summed F-scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .masks import Mask


@dataclass(frozen=True)
class SegEval:
    p_n: float
    r_n: float
    f_n: float
    p: float
    r: float
    f: float
    matching: dict[int, int]
    empty_prediction: bool = False


def masks_from_labels(labels: np.ndarray) -> list[Mask]:
    """One mask per nonzero label id, ascending."""
    return [Mask(labels == v) for v in np.unique(labels) if v != 0]


def _pair_counts(pred: list[Mask], gt: list[Mask]) -> np.ndarray:
    inter = np.zeros((len(pred), len(gt)), dtype=np.int64)
    for i, s in enumerate(pred):
        for j, g in enumerate(gt):
            inter[i, j] = int((s.data & g.data).sum())
    return inter


def _f_matrix(pred: list[Mask], gt: list[Mask], inter: np.ndarray) -> np.ndarray:
    sizes_s = np.array([m.area for m in pred], dtype=np.float64)
    sizes_g = np.array([m.area for m in gt], dtype=np.float64)
    return 2.0 * inter / (sizes_s[:, None] + sizes_g[None, :])


def match_segments(pred: list[Mask], gt: list[Mask]) -> dict[int, int]:
    """Injective prediction-to-ground-truth matching maximizing the summed
    per-pair F-scores; zero-overlap pairs stay unmatched."""
    if not pred or not gt:
        return {}
    f = _f_matrix(pred, gt, _pair_counts(pred, gt))
    rows, cols = linear_sum_assignment(f, maximize=True)
    return {int(i): int(j) for i, j in zip(rows, cols) if f[i, j] > 0.0}


def _check_gt_disjoint(gt: list[Mask]) -> None:
    if not gt:
        return
    total = np.zeros(gt[0].shape, dtype=np.int32)
    for g in gt:
        total[g.data] += 1
    if (total > 1).any():
        raise ValueError("ground-truth masks overlap")


def osn_scores(pred: list[Mask], gt: list[Mask],
               matching: dict[int, int] | None = None
               ) -> tuple[float, float, float]:
    if matching is None:
        matching = match_segments(pred, gt)
    n_s, n_g = len(pred), len(gt)
    sum_p = sum_r = sum_f = 0.0
    for i, j in matching.items():
        inter = float((pred[i].data & gt[j].data).sum())
        p = inter / pred[i].area
        r = inter / gt[j].area
        sum_p += p
        sum_r += r
        sum_f += 2.0 * p * r / (p + r) if p + r > 0.0 else 0.0
    p_n = sum_p / n_s if n_s else 0.0
    r_n = sum_r / n_g if n_g else 0.0
    f_n = sum_f / max(n_s, n_g) if max(n_s, n_g) else 0.0
    return p_n, r_n, f_n


def pixel_scores(pred: list[Mask], gt: list[Mask],
                 matching: dict[int, int] | None = None
                 ) -> tuple[float, float, float]:
    """Micro-averaged pixel precision/recall/F over the matched pairs, with
    each pair's overlap counting as true positives."""
    if matching is None:
        matching = match_segments(pred, gt)
    tp = pred_px = gt_px = 0
    for i, j in matching.items():
        tp += int((pred[i].data & gt[j].data).sum())
        pred_px += pred[i].area
        gt_px += gt[j].area
    p = tp / pred_px if pred_px else 0.0
    r = tp / gt_px if gt_px else 0.0
    f = 2.0 * p * r / (p + r) if p + r > 0.0 else 0.0
    return p, r, f


def evaluate(pred: list[Mask], gt: list[Mask]) -> SegEval:
    """Full evaluation with one shared optimal matching. An empty
    prediction list yields all-zero scores with the flag set."""
    _check_gt_disjoint(gt)
    if not pred:
        return SegEval(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, {}, empty_prediction=True)
    matching = match_segments(pred, gt)
    p_n, r_n, f_n = osn_scores(pred, gt, matching)
    p, r, f = pixel_scores(pred, gt, matching)
    return SegEval(p_n, r_n, f_n, p, r, f, matching)
