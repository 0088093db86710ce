#!/usr/bin/env python3
"""
Classification metrics.
"""

from typing import Optional

import numpy as np

from common.exceptions import InvalidInputError


def _check_pair(predictions, labels):
    predictions = np.asarray(predictions).astype(np.int64).reshape(-1)
    labels = np.asarray(labels).astype(np.int64).reshape(-1)
    if predictions.size == 0 or labels.size == 0:
        raise InvalidInputError("balanced accuracy needs at least one prediction")
    if predictions.shape != labels.shape:
        raise InvalidInputError(f"{predictions.size} predictions for {labels.size} labels")
    return predictions, labels


def per_class_recall(predictions, labels) -> dict:
    """Recall of every class present in labels"""
    predictions, labels = _check_pair(predictions, labels)
    return {int(c): float(np.mean(predictions[labels == c] == c)) for c in np.unique(labels)}


def score_balanced_accuracy(predictions, labels) -> float:
    """Unweighted mean of per-class recall over the classes present in labels"""
    recalls = per_class_recall(predictions, labels)
    return float(np.mean(list(recalls.values())))


def confusion_matrix(predictions, labels, classes: Optional[int] = None) -> np.ndarray:
    """Counts [true class, predicted class]"""
    predictions, labels = _check_pair(predictions, labels)
    classes = classes or int(max(predictions.max(), labels.max())) + 1
    matrix = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(matrix, (labels, predictions), 1)
    return matrix
