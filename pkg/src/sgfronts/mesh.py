"""Symmetric graded meshes with nodes pinned at 0 and +-Delta."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MeshSpec", "domain_half_length", "refine_midpoints"]


def domain_half_length(Delta, L=None):
    """Truncation half-length: ``max(50, Delta + 40)`` unless given."""
    return float(L) if L is not None else max(50.0, Delta + 40.0)


@dataclass(frozen=True)
class MeshSpec:
    """Target local spacing, as a function of the distance to the jump at +-Delta.

    Near ``x = Delta`` the spacing is ``h_fine`` and relaxes to ``h_core`` over
    ``width``; beyond ``Delta + core`` it grows at rate ``growth`` up to
    ``h_max``. Node counts per segment are frozen via ``counts`` when a
    family of meshes must vary smoothly with Delta.
    """

    h_core: float = 0.025
    h_max: float = 0.25
    h_fine: float | None = None
    width: float | None = None
    core: float = 10.0
    growth: float = 0.03
    counts: tuple[int, int] | None = None

    @classmethod
    def for_profile(cls, profile, h_core=0.025, **kw):
        delta = getattr(profile, "delta", 0.0)
        if delta > 0:
            return cls(h_core=h_core, h_fine=min(h_core, delta / 8.0),
                       width=4.0 * delta, **kw)
        Delta = getattr(profile, "Delta", None)
        if Delta is not None and Delta < 4.0 * h_core:
            # keep several intervals across a very narrow hat and grade smoothly away
            return cls(h_core=h_core, h_fine=Delta / 8.0, width=2.0 * Delta, **kw)
        return cls(h_core=h_core, **kw)

    def spacing(self, x, Delta):
        x = np.asarray(x, dtype=float)
        dist = np.abs(x - Delta)
        h = np.full_like(x, self.h_core)
        if self.h_fine is not None and self.h_fine < self.h_core:
            w = self.width or 5.0 * self.h_fine
            h = self.h_fine + (self.h_core - self.h_fine) * (1.0 - np.exp(-dist / w))
        far = np.maximum(x - Delta - self.core, 0.0)
        return np.minimum(self.h_max, h + self.growth * far)

    def _segment(self, a, b, Delta, n=None, samples=4001):
        t = np.linspace(0.0, 1.0, samples)
        xs = a + (b - a) * t
        dens = 1.0 / self.spacing(xs, Delta)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
        if n is None:
            n = max(4, int(math.ceil(cum[-1])))
        targets = np.linspace(0.0, cum[-1], n + 1)
        nodes = np.interp(targets, cum, xs)
        nodes[0], nodes[-1] = a, b
        return nodes, n

    def counts_for(self, Delta, L):
        _, n_in = self._segment(0.0, Delta, Delta)
        _, n_out = self._segment(Delta, L, Delta)
        return n_in, n_out

    def nodes(self, Delta, L):
        """Strictly increasing symmetric nodes on [-L, L] containing 0 and +-Delta."""
        if not 0 < Delta < L:
            raise ValueError("need 0 < Delta < L")
        n_in, n_out = self.counts if self.counts is not None else (None, None)
        inner, _ = self._segment(0.0, Delta, Delta, n_in)
        outer, _ = self._segment(Delta, L, Delta, n_out)
        half = np.concatenate([inner, outer[1:]])
        return np.concatenate([-half[:0:-1], half])

    def frozen(self, Delta, L):
        return MeshSpec(self.h_core, self.h_max, self.h_fine, self.width, self.core,
                        self.growth, self.counts_for(Delta, L))


def refine_midpoints(x):
    """Insert the midpoint of every interval."""
    x = np.asarray(x, dtype=float)
    out = np.empty(2 * x.size - 1)
    out[0::2] = x
    out[1::2] = 0.5 * (x[1:] + x[:-1])
    return out
