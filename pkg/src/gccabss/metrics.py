"""Extraction quality measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import SignalLike, as_signal

__all__ = ["PI_FLOOR_DB", "GlobalVector", "global_vector", "performance_index", "match_source"]

PI_FLOOR_DB = -300.0


@dataclass(frozen=True)
class GlobalVector:
    """Composition ``g = A^T w`` of mixing and extraction; ideally one nonzero entry."""

    g: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        return self.g / np.linalg.norm(self.g)

    @property
    def dominant(self) -> int:
        return int(np.argmax(np.abs(self.g)))


def global_vector(A, w) -> GlobalVector:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w = np.asarray(w, dtype=float).ravel()
    if A.shape[0] != w.size:
        raise ValueError(f"A has {A.shape[0]} rows but w has length {w.size}")
    g = A.T @ w
    if not np.any(g):
        raise ValueError("global vector is zero: w is orthogonal to every column of A")
    return GlobalVector(g)


def performance_index(g) -> float:
    """``10 log10( (sum_l g_l^2 / max g^2 - 1) / (L - 1) )`` in dB.

    A perfectly concentrated ``g`` gives ``log10(0)``, clamped to ``-300`` dB.
    """
    if isinstance(g, GlobalVector):
        g = g.g
    g2 = np.square(np.asarray(g, dtype=float).ravel())
    if g2.size < 2:
        raise ValueError("performance index needs at least two components")
    k = int(np.argmax(g2))
    peak = g2[k]
    if peak == 0:
        raise ValueError("performance index of a zero vector is undefined")
    # sum(g^2)/max - 1 summed without the peak term, avoiding cancellation
    ratio = (np.delete(g2, k).sum() / peak) / (g2.size - 1)
    if ratio <= 0:
        return PI_FLOOR_DB
    return max(PI_FLOOR_DB, 10.0 * np.log10(ratio))


def match_source(y: SignalLike, sources: SignalLike) -> tuple[int, float]:
    """Index of the source most correlated with ``y`` and the signed correlation."""
    yv = as_signal(y).data
    if yv.shape[0] != 1:
        raise ValueError("y must be a single channel")
    s = as_signal(sources).data
    if s.shape[1] != yv.shape[1]:
        raise ValueError("y and sources must have the same length")
    yc = yv[0] - yv[0].mean()
    sc = s - s.mean(axis=1, keepdims=True)
    ny = np.linalg.norm(yc)
    ns = np.linalg.norm(sc, axis=1)
    if ny == 0 or np.any(ns == 0):
        raise ValueError("correlation undefined for a zero-variance signal")
    corr = sc @ yc / (ns * ny)
    idx = int(np.argmax(np.abs(corr)))
    return idx, float(corr[idx])
