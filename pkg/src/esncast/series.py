"""Elementary series transforms shared by the models."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def difference(series: np.ndarray) -> np.ndarray:
    """First differences: out[t] = series[t+1] - series[t], one element shorter."""
    series = np.asarray(series, dtype=float)
    if series.shape[0] < 2:
        raise DataError(f"difference needs at least 2 values, got {series.shape[0]}")
    return np.diff(series, axis=0)


def integrate(diffs: np.ndarray, x0) -> np.ndarray:
    """Inverse of :func:`difference`: cumulative sums prefixed by x0.

    Works on 1-d series (scalar x0) and time-major 2-d panels (x0 per channel).
    """
    diffs = np.asarray(diffs, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    head = x0[np.newaxis, ...]
    if diffs.shape[0] == 0:
        return head.copy()
    return np.concatenate([head, x0 + np.cumsum(diffs, axis=0)], axis=0)


class ChannelScaler:
    """Per-channel scaling to a tanh-friendly range, fitted on the training slice.

    mode "minmax" maps [min, max] -> [-1, 1]; mode "maxabs" divides by max(|x|),
    preserving zero (used for differenced channels); mode "none" is the identity.
    Constant channels map to 0 ("minmax") or stay unscaled ("maxabs" guard).
    """

    def __init__(self, mode: str = "minmax"):
        if mode not in ("minmax", "maxabs", "none"):
            raise DataError(f"unknown scaling mode {mode!r}")
        self.mode = mode
        self.lo_: np.ndarray | None = None
        self.hi_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None

    def fit(self, x: np.ndarray) -> "ChannelScaler":
        x = np.asarray(x, dtype=float)
        if self.mode == "minmax":
            self.lo_ = x.min(axis=0)
            self.hi_ = x.max(axis=0)
        elif self.mode == "maxabs":
            scale = np.abs(x).max(axis=0)
            self.scale_ = np.where(scale > 0, scale, 1.0)
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.mode == "none":
            return x.copy()
        if self.mode == "maxabs":
            return x / self.scale_
        span = self.hi_ - self.lo_
        safe = np.where(span > 0, span, 1.0)
        scaled = 2.0 * (x - self.lo_) / safe - 1.0
        return np.where(span > 0, scaled, 0.0)

    def inverse_transform(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.mode == "none":
            return y.copy()
        if self.mode == "maxabs":
            return y * self.scale_
        span = self.hi_ - self.lo_
        return np.where(span > 0, (y + 1.0) * span / 2.0 + self.lo_, self.lo_)

    def state_dict(self) -> dict:
        out = {"mode": self.mode}
        for name in ("lo_", "hi_", "scale_"):
            v = getattr(self, name)
            if v is not None:
                out[name] = np.asarray(v)
        return out

    @classmethod
    def from_state_dict(cls, state: dict) -> "ChannelScaler":
        sc = cls(str(state["mode"]))
        for name in ("lo_", "hi_", "scale_"):
            if name in state:
                setattr(sc, name, np.asarray(state[name], dtype=float))
        return sc
