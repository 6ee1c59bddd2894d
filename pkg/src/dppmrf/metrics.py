"""Pixel-level segmentation quality against binary ground truth (pore = 1)."""

from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np


class ConfusionCounts(NamedTuple):
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


class Metrics(NamedTuple):
    """``None`` marks a metric whose denominator is zero."""

    precision: Optional[float]
    recall: Optional[float]
    accuracy: Optional[float]


def _binary(img, name):
    img = np.asarray(img)
    if not np.isin(img, (0, 1)).all():
        raise ValueError(f"{name} is not a binary image")
    return img.astype(bool)


def confusion(pred, truth) -> ConfusionCounts:
    pred, truth = _binary(pred, "prediction"), _binary(truth, "truth")
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: prediction {pred.shape} vs truth {truth.shape}")
    tp = int(np.count_nonzero(pred & truth))
    tn = int(np.count_nonzero(~pred & ~truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    return ConfusionCounts(tp, tn, fp, fn)


def _ratio(num, den):
    return num / den if den else None


def metrics(c: ConfusionCounts) -> Metrics:
    return Metrics(_ratio(c.tp, c.tp + c.fp), _ratio(c.tp, c.tp + c.fn),
                   _ratio(c.tp + c.tn, c.total))


def porosity(img) -> float:
    """Pore pixels over all pixels."""
    img = _binary(img, "image")
    return float(np.count_nonzero(img)) / img.size
