"""M-PSK signal sets and index-level labelling maps.

Points are stored at unit energy; the dB energy scale is applied
multiplicatively by the channel layer.  Labellings are permutations of the
point indices (bit-to-index conversion is natural binary and lives with the
encoder).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Constellation",
    "Labelling",
    "DistanceSpectrum",
    "make_psk",
    "identity_labelling",
    "bar_labelling",
    "squared_distance",
]

#: absolute tolerance for floating comparisons on constellation geometry
GEOM_ATOL = 1e-9


@dataclass(frozen=True)
class Constellation:
    """An M-PSK signal set, point k at angle 2*pi*k/M."""

    M: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.points.shape != (self.M,):
            raise ValueError("points must be a length-M vector")
        if not np.allclose(np.abs(self.points), 1.0, atol=1e-12):
            raise ValueError("points must have unit modulus")

    def distance_spectrum(self) -> "DistanceSpectrum":
        """Distinct nonzero squared Euclidean distances, ascending."""
        d2 = squared_distance(self, 0, np.arange(1, self.M))
        deltas = np.unique(np.round(d2, 12))
        return DistanceSpectrum(deltas=deltas)


@dataclass(frozen=True)
class Labelling:
    """A bijection on {0, ..., M-1} mapping message/edge indices to points."""

    name: str
    map: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.map)
        if sorted(m.tolist()) != list(range(len(m))):
            raise ValueError(f"labelling {self.name!r} is not a bijection")

    @property
    def M(self) -> int:
        return len(self.map)

    def __call__(self, k):
        return self.map[k]


@dataclass(frozen=True)
class DistanceSpectrum:
    deltas: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas)
        if np.any(d <= 0) or np.any(np.diff(d) <= 0):
            raise ValueError("deltas must be positive and strictly increasing")


def _check_m(M: int) -> None:
    if M < 4 or (M & (M - 1)) != 0:
        raise ValueError(f"M must be a power of two >= 4, got {M}")


def make_psk(M: int) -> Constellation:
    """Unit-energy M-PSK, point k = exp(j*2*pi*k/M)."""
    _check_m(M)
    k = np.arange(M)
    return Constellation(M=M, points=np.exp(2j * np.pi * k / M))


def identity_labelling(M: int) -> Labelling:
    """Constant labelling: index k maps to point k."""
    _check_m(M)
    return Labelling(name="identity", map=np.arange(M))


def bar_labelling(M: int) -> Labelling:
    """Relay map of the proposed scheme: k for even k, (k + M/2) mod M for odd k."""
    _check_m(M)
    k = np.arange(M)
    mapped = np.where(k % 2 == 0, k, (k + M // 2) % M)
    return Labelling(name="bar", map=mapped)


def squared_distance(c: Constellation, i, j):
    """Squared Euclidean distance |points[i] - points[j]|**2.

    Accepts scalar or array indices; raises IndexError when out of range.
    """
    i = np.asarray(i)
    j = np.asarray(j)
    if np.any(i < 0) or np.any(i >= c.M) or np.any(j < 0) or np.any(j >= c.M):
        raise IndexError(f"constellation index out of range for M={c.M}")
    d = np.abs(c.points[i] - c.points[j]) ** 2
    return d if d.ndim else float(d)
