"""Monte-Carlo capacity machinery for the half-duplex relay link.

Evaluates the five constellation-constrained mutual-information terms (the
relay phase-1 observation, the source phase-2 contribution given the relay
symbol, the direct phase-1 observation, the joint phase-2 multiple access
term and the phase-1 broadcast cut) plus the Gaussian-input lower/upper
capacity bounds with their coherent-combining power-split parameter.

Estimators use an outer Monte-Carlo over fade draws and an inner average over
noise draws.  All logs are base 2; values are bits per channel use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams
from .constellation import Constellation

__all__ = [
    "CapacityPoint",
    "mi_term",
    "cc_bounds",
    "gaussian_bounds",
    "direct_cc",
    "direct_gaussian",
    "es_at_rate",
]

_LN2 = np.log(2.0)
_TERMS = ("R1", "R2", "R3", "R4", "R5")


@dataclass(frozen=True)
class CapacityPoint:
    es_db: float
    value: float
    stderr: float
    kind: str                      # CL_CC, CU_CC, CL_G, CU_G, direct_CC, direct_G
    beta_star: float | None = None


def _stream(seed: int, draw_block: int, role: int) -> np.random.Generator:
    bg = np.random.Philox(key=np.uint64(seed), counter=[1, 0, draw_block, role])
    return np.random.Generator(bg)


def _cn_std(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _lse(e, axis):
    m = e.max(axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(e - m), axis=axis, keepdims=True))).squeeze(axis)


def _single_obs_term(h, pts, z):
    """Per-fade MI of one complex observation, uniform inputs.

    h: (F,), pts: (M,) scaled points, z: (F, Z) CN(0,1) draws.
    Uses the exponent identity -|z-d|^2 + |z|^2 = 2 Re(conj(z) d) - |d|^2.
    """
    M = pts.shape[0]
    d = h[:, None, None] * (pts[None, None, :] - pts[None, :, None])  # (F, i1, i)
    expo = (
        2 * (z.real[:, :, None, None] * d.real[:, None, :, :]
             + z.imag[:, :, None, None] * d.imag[:, None, :, :])
        - (np.abs(d) ** 2)[:, None, :, :]
    )  # (F, Z, i1, i)
    lse = _lse(expo, axis=3)
    return np.log2(M) - lse.mean(axis=(1, 2)) / _LN2


def mi_term(
    which: str,
    constellations,
    params: ChannelParams,
    n_fade: int = 2000,
    n_noise: int = 200,
    seed: int = 0,
    chunk: int = 100,
):
    """Estimate one mutual-information term; returns (value, stderr).

    ``constellations`` is the (source phase 1, source phase 2, relay) triple
    of Constellation objects.  Fade and noise substreams depend only on their
    role, so structurally symmetric terms evaluated with swapped variances
    reproduce each other exactly at a common seed.
    """
    if which not in _TERMS:
        raise ValueError(f"unknown term {which!r}")
    if n_fade * n_noise < 1000:
        raise ValueError("need at least 1000 samples for a meaningful stderr")
    cs1, cs2, cr = constellations
    amp = np.sqrt(params.es_linear)
    p1 = amp * cs1.points
    p2 = amp * cs2.points
    pr = amp * cr.points

    vals = []
    for block in range(0, n_fade, chunk):
        f = min(chunk, n_fade - block)
        rf1 = _stream(seed, block, 0)
        rf2 = _stream(seed, block, 1)
        rz1 = _stream(seed, block, 2)
        rz2 = _stream(seed, block, 3)
        h1 = _cn_std(rf1, f)
        h2 = _cn_std(rf2, f)
        z1 = _cn_std(rz1, (f, n_noise))
        z2 = _cn_std(rz2, (f, n_noise))
        if which == "R1":
            vals.append(_single_obs_term(np.sqrt(params.sigma2_sr) * h1, p1, z1))
        elif which == "R2":
            vals.append(_single_obs_term(np.sqrt(params.sigma2_sd) * h1, p2, z1))
        elif which == "R3":
            vals.append(_single_obs_term(np.sqrt(params.sigma2_sd) * h1, p1, z1))
        elif which == "R5":
            hsr = np.sqrt(params.sigma2_sr) * h1
            hsd = np.sqrt(params.sigma2_sd) * h2
            d_r = hsr[:, None, None] * (p1[None, None, :] - p1[None, :, None])
            d_d = hsd[:, None, None] * (p1[None, None, :] - p1[None, :, None])
            expo = (
                2 * (z1.real[:, :, None, None] * d_r.real[:, None, :, :]
                     + z1.imag[:, :, None, None] * d_r.imag[:, None, :, :])
                - (np.abs(d_r) ** 2)[:, None, :, :]
                + 2 * (z2.real[:, :, None, None] * d_d.real[:, None, :, :]
                       + z2.imag[:, :, None, None] * d_d.imag[:, None, :, :])
                - (np.abs(d_d) ** 2)[:, None, :, :]
            )
            lse = _lse(expo, axis=3)
            vals.append(np.log2(cs1.M) - lse.mean(axis=(1, 2)) / _LN2)
        else:  # R4: joint (source phase 2, relay) -> destination
            hsd = np.sqrt(params.sigma2_sd) * h1
            hrd = np.sqrt(params.sigma2_rd) * h2
            joint = (hsd[:, None, None] * p2[None, :, None]
                     + hrd[:, None, None] * pr[None, None, :]).reshape(f, -1)
            a = joint.shape[1]
            d = joint[:, None, :] - joint[:, :, None]           # (F, a1, a)
            expo = (
                2 * (z1.real[:, :, None, None] * d.real[:, None, :, :]
                     + z1.imag[:, :, None, None] * d.imag[:, None, :, :])
                - (np.abs(d) ** 2)[:, None, :, :]
            )
            lse = _lse(expo, axis=3)
            vals.append(np.log2(a) - lse.mean(axis=(1, 2)) / _LN2)
    per_fade = np.concatenate(vals)
    per_fade = np.clip(per_fade, 0.0, None)
    return float(per_fade.mean()), float(per_fade.std(ddof=1) / np.sqrt(n_fade))


def cc_bounds(
    params: ChannelParams,
    constellations,
    n_fade: int = 2000,
    n_noise: int = 200,
    seed: int = 0,
):
    """Constellation-constrained capacity bounds; returns (lower, upper)
    CapacityPoints.

    Lower: min of (relay-decoding cut, destination cut); upper replaces the
    relay phase-1 term with the phase-1 broadcast cut.
    """
    est = {}
    for i, term in enumerate(_TERMS):
        est[term] = mi_term(term, constellations, params, n_fade, n_noise,
                            seed=seed + 1000 * i)

    def half_sum(a, b):
        v = 0.5 * est[a][0] + 0.5 * est[b][0]
        se = 0.5 * np.hypot(est[a][1], est[b][1])
        return v, se

    branch_relay = half_sum("R1", "R2")
    branch_dest = half_sum("R3", "R4")
    branch_bc = half_sum("R5", "R2")
    low = min(branch_relay, branch_dest, key=lambda t: t[0])
    up = min(branch_bc, branch_dest, key=lambda t: t[0])
    return (
        CapacityPoint(params.es_db, low[0], low[1], "CL_CC"),
        CapacityPoint(params.es_db, up[0], up[1], "CU_CC"),
    )


def _c(x):
    return np.log2(1.0 + x)


def gaussian_bounds(
    params: ChannelParams,
    beta_grid=None,
    n_fade: int = 200_000,
    seed: int = 0,
):
    """Gaussian-input capacity bounds maximized over the power-split /
    coherent-combining parameter grid; returns (lower, upper) points."""
    if beta_grid is None:
        beta_grid = np.linspace(0.0, 1.0, 21)
    beta_grid = np.asarray(beta_grid, dtype=float)
    if beta_grid.size == 0:
        raise ValueError("beta grid must be nonempty")
    es = params.es_linear
    g = np.random.Generator(np.random.Philox(key=np.uint64(seed), counter=[2, 0, 0, 0]))
    hsd2 = params.sigma2_sd * g.exponential(size=n_fade)
    hsr2 = params.sigma2_sr * g.exponential(size=n_fade)
    hrd2 = params.sigma2_rd * g.exponential(size=n_fade)
    comb = np.sqrt(hsd2 * hrd2)

    def pick(per_draw_branches):
        """max over beta of min over cuts of the expectations."""
        best = None
        for bi, (a, b) in enumerate(per_draw_branches):
            ma, mb = float(a.mean()), float(b.mean())
            v = min(ma, mb)
            sel = a if ma <= mb else b
            se = float(sel.std(ddof=1) / np.sqrt(n_fade))
            if best is None or v > best[0]:
                best = (v, se, beta_grid[bi])
        return best

    lower_branches = []
    upper_branches = []
    for beta in beta_grid:
        t1 = 0.5 * (_c(hsr2 * es) + _c((1 - beta) * hsd2 * es))
        t2 = 0.5 * (_c(hsd2 * es)
                    + _c(hsd2 * es + hrd2 * es + 2 * np.sqrt(beta) * comb * es))
        lower_branches.append((t1, t2))
        u1 = 0.5 * (_c((hsd2 + hsr2) * es) + _c((1 - beta) * hsd2 * es))
        u2 = 0.5 * (_c(hsd2 * es + hrd2 * es + 2 * np.sqrt(beta) * comb * es)
                    + _c(hsd2 * es))
        upper_branches.append((u1, u2))
    lv, lse_, lbeta = pick(lower_branches)
    uv, use_, ubeta = pick(upper_branches)
    return (
        CapacityPoint(params.es_db, lv, lse_, "CL_G", beta_star=float(lbeta)),
        CapacityPoint(params.es_db, uv, use_, "CU_G", beta_star=float(ubeta)),
    )


def direct_cc(
    params: ChannelParams,
    constellation: Constellation,
    n_fade: int = 2000,
    n_noise: int = 200,
    seed: int = 0,
) -> CapacityPoint:
    """Constellation-constrained rate of the direct source-destination link
    (no relay, no half-duplex factor)."""
    triple = (constellation, constellation, constellation)
    v, se = mi_term("R3", triple, params, n_fade, n_noise, seed=seed)
    return CapacityPoint(params.es_db, v, se, "direct_CC")


def direct_gaussian(params: ChannelParams, n_fade: int = 200_000,
                    seed: int = 0) -> CapacityPoint:
    g = np.random.Generator(np.random.Philox(key=np.uint64(seed), counter=[3, 0, 0, 0]))
    hsd2 = params.sigma2_sd * g.exponential(size=n_fade)
    vals = _c(hsd2 * params.es_linear)
    return CapacityPoint(
        params.es_db, float(vals.mean()),
        float(vals.std(ddof=1) / np.sqrt(n_fade)), "direct_G",
    )


def es_at_rate(points, rate: float) -> float:
    """Energy (dB) at which a capacity curve crosses the given rate, by
    linear interpolation over (es_db, value) pairs."""
    pts = sorted((p.es_db, p.value) for p in points)
    for (e0, v0), (e1, v1) in zip(pts, pts[1:]):
        if (v0 - rate) * (v1 - rate) <= 0 and v0 != v1:
            return float(e0 + (rate - v0) * (e1 - e0) / (v1 - v0))
    raise ValueError("curve does not cross the requested rate on the grid")
