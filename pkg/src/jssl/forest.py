"""Random survival forest with log-rank splitting for one target cause."""
import math

import numpy as np

from . import kernels
from .hazards import FittedCumulativeHazard, ZeroHazard, _as_2d


class ForestHazard(FittedCumulativeHazard):
    """Average over trees of the terminal-node Nelson-Aalen curves."""

    def __init__(self, jump_times, arrays, n_features):
        self.jump_times = np.asarray(jump_times, dtype=float)
        (self.feature, self.threshold, self.left, self.right, self.leaf,
         self.tree_offset, self.leaf_ptr, self.leaf_col, self.leaf_val) = arrays
        self.n_features = n_features

    @property
    def n_trees(self):
        return self.tree_offset.shape[0] - 1

    def apply(self, X):
        X = np.ascontiguousarray(_as_2d(X, self.n_features))
        return kernels.forest_apply(X, self.feature, self.threshold, self.left, self.right,
                                    self.leaf, self.tree_offset)

    def increments(self, X, t_max=None):
        ids = self.apply(X)
        return kernels.forest_increments(ids, self.leaf_ptr, self.leaf_col, self.leaf_val,
                                         self._n_cols(t_max))

    def to_dict(self):
        names = ("feature", "threshold", "left", "right", "leaf", "tree_offset",
                 "leaf_ptr", "leaf_col", "leaf_val")
        out = {"type": "forest", "jump_times": self.jump_times.tolist(), "n_features": self.n_features}
        for name in names:
            out[name] = getattr(self, name).tolist()
        return out

    @classmethod
    def from_dict(cls, obj):
        ints = ("feature", "left", "right", "leaf", "tree_offset", "leaf_ptr", "leaf_col")
        arrays = tuple(np.asarray(obj[k], dtype=np.int64 if k in ints else float)
                       for k in ("feature", "threshold", "left", "right", "leaf", "tree_offset",
                                 "leaf_ptr", "leaf_col", "leaf_val"))
        return cls(obj["jump_times"], arrays, int(obj["n_features"]))


def fit_survival_forest(d, target="cause1", n_trees=100, mtry=None, min_node_size=15,
                        bootstrap=True, seed=0, max_cuts=32):
    """Grow ``n_trees`` log-rank trees on bootstrap samples of ``d``.

    Candidate cutpoints are midpoints between distinct values, at most
    ``max_cuts`` of them drawn at random per covariate and node. A node
    with fewer than ``min_node_size`` rows, or with no admissible split,
    becomes a leaf holding its own Nelson-Aalen estimate on the grid of
    all training event times.
    """
    event = d.event_indicator(target)
    if not event.any():
        return ZeroHazard()
    p = d.p
    if mtry is None:
        mtry = max(1, math.ceil(math.sqrt(p))) if p else 0
    mtry = min(int(mtry), p)
    order = np.argsort(d.time, kind="stable")
    time = np.ascontiguousarray(d.time[order])
    ev = np.ascontiguousarray(event[order])
    X = np.ascontiguousarray(d.X[order])
    grid = np.unique(time[ev])
    gi = np.where(ev, np.searchsorted(grid, time), -1).astype(np.int64)
    arrays = kernels.grow_forest(X, time, ev, gi, int(n_trees), int(mtry), int(min_node_size),
                                 bool(bootstrap), int(seed) & ((1 << 63) - 1), int(max_cuts))
    return ForestHazard(grid, arrays, p)
