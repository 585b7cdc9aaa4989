"""Viterbi decoders: relay ML decoding on the base trellis, near-ML joint
decoding on the product trellis, and the genie-aided decoder that assumes the
relay re-encoded the true source path.

All kernels are batch-vectorized over frames; the single-frame entry points
wrap a batch of one.  Brute-force oracles enumerate the full path set and are
meant for short frames only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .trellis import (
    LabelledTrellis,
    Path,
    ProductTrellis,
    build_product_trellis,
    enumerate_paths,
)

__all__ = [
    "DecodeResult",
    "relay_decode",
    "near_ml_decode",
    "ideal_ml_decode",
    "relay_decode_batch",
    "near_ml_decode_batch",
    "ideal_ml_decode_batch",
    "complexity_per_bit",
    "metric_relay",
    "metric_joint",
    "metric_ideal",
    "brute_force_relay",
    "brute_force_near_ml",
    "brute_force_ideal",
]


@dataclass(frozen=True)
class DecodeResult:
    path: Path
    metric: float
    op_count: int
    relay_path: Path | None = None


def complexity_per_bit(n_states: int, n_inputs: int) -> float:
    """Nominal near-ML decoding cost: 2 N^2 K^2 / log2(K) operations per bit."""
    if n_states < 2 or n_inputs < 2:
        raise ValueError("need at least two states and two branches per state")
    return 2 * n_states**2 * n_inputs**2 / np.log2(n_inputs)


def _as_batch(*arrays):
    out = []
    for a in arrays:
        a = np.asarray(a)
        out.append(a[None, :] if a.ndim == 1 else a)
    return out


# ---------------------------------------------------------------------------
# in-edge tables
# ---------------------------------------------------------------------------

class _BaseTables:
    """In-edges of each base-trellis state, grouped by destination."""

    def __init__(self, lt: LabelledTrellis):
        t = lt.trellis
        n, k = t.n_states, t.n_inputs
        order = np.argsort(t.next_state.ravel(), kind="stable")
        src, u = np.divmod(order, k)
        self.lt = lt
        self.n_states = n
        self.k_in = k
        self.in_src = src
        self.in_u = u
        self.in_is1 = lt.x_s1[src, u]
        self.in_is2 = lt.x_s2[src, u]
        self.in_ir = lt.x_r[src, u]


class _ProductTables:
    """In-edges of each product state, grouped by destination."""

    def __init__(self, pt: ProductTrellis):
        order = np.argsort(pt.edge_dst, kind="stable")
        m = pt.base.constellation.M
        self.pt = pt
        self.n_states = pt.n_states
        self.k_in = pt.n_edges_per_state
        self.in_src = pt.edge_src[order]
        self.in_ua = pt.edge_ua[order]
        self.in_ub = pt.edge_ub[order]
        self.in_is1a = pt.lab_s1a[order]
        self.in_bt = pt.lab_s2a[order] * m + pt.lab_rb[order]
        pts = pt.base.constellation.points
        self.in_d_s1 = np.abs(pts[pt.lab_s1a[order]] - pts[pt.lab_s1b[order]]) ** 2


_BASE_CACHE: dict[int, _BaseTables] = {}
_PROD_CACHE: dict[int, _ProductTables] = {}


def _base_tables(lt: LabelledTrellis) -> _BaseTables:
    key = id(lt)
    if key not in _BASE_CACHE:
        _BASE_CACHE[key] = _BaseTables(lt)
    return _BASE_CACHE[key]


def _product_tables(pt: ProductTrellis) -> _ProductTables:
    key = id(pt)
    if key not in _PROD_CACHE:
        _PROD_CACHE[key] = _ProductTables(pt)
    return _PROD_CACHE[key]


# ---------------------------------------------------------------------------
# generic batched Viterbi
# ---------------------------------------------------------------------------

def _viterbi(stage_metric, n_states, k_in, in_src, B, L):
    """Run add-compare-select over L stages; returns (survivors, final metric).

    stage_metric(t) yields the (B, n_states * k_in) in-edge costs, grouped by
    destination state.  Paths start and end in state 0.
    """
    big = 1e18
    metric = np.full((B, n_states), big)
    metric[:, 0] = 0.0
    dtype = np.uint8 if k_in <= 255 else np.uint16
    surv = np.empty((L, B, n_states), dtype=dtype)
    offset_interval = 256
    for t in range(L):
        cand = metric[:, in_src] + stage_metric(t)
        cand = cand.reshape(B, n_states, k_in)
        arg = cand.argmin(axis=2)
        metric = np.take_along_axis(cand, arg[:, :, None], axis=2)[:, :, 0]
        surv[t] = arg
        if (t + 1) % offset_interval == 0:
            metric -= metric.min(axis=1, keepdims=True)
    return surv, metric


def _traceback(surv, in_src, in_slot_fields, k_in, end_state=0):
    """Walk survivors backwards from end_state; returns per-field sequences."""
    L, B, _ = surv.shape
    fields = [np.empty((B, L), dtype=np.int64) for _ in in_slot_fields]
    state = np.full(B, end_state, dtype=np.int64)
    rows = np.arange(B)
    for t in range(L - 1, -1, -1):
        slot = surv[t][rows, state].astype(np.int64)
        idx = state * k_in + slot
        for f, table in zip(fields, in_slot_fields):
            f[:, t] = table[idx]
        state = in_src[idx]
    return fields


# ---------------------------------------------------------------------------
# batch decoders
# ---------------------------------------------------------------------------

def relay_decode_batch(lt: LabelledTrellis, y_r, h_sr, es_amp: float = 1.0):
    """ML sequence decoding of the Phase-1 observation; returns input symbols
    (B, L) of the decoded paths."""
    y_r, h_sr = _as_batch(y_r, h_sr)
    tb = _base_tables(lt)
    pts = es_amp * lt.constellation.points
    B, L = y_r.shape

    def stage(t):
        tab = np.abs(y_r[:, t, None] - h_sr[:, t, None] * pts[None, :]) ** 2
        return tab[:, tb.in_is1]

    surv, metric = _viterbi(stage, tb.n_states, tb.k_in, tb.in_src, B, L)
    (inputs,) = _traceback(surv, tb.in_src, [tb.in_u], tb.k_in)
    return inputs, metric[:, 0]


def near_ml_decode_batch(pt: ProductTrellis, y_d1, y_d2, real: ChannelRealization,
                         es_amp: float = 1.0):
    """Joint source/relay-hypothesis decoding on the product trellis.

    Returns (source inputs, relay-hypothesis inputs, metrics), each (B, L).
    """
    y_d1, y_d2 = _as_batch(y_d1, y_d2)
    h_sd1, h_sd2, h_rd, h_sr = _as_batch(real.h_sd1, real.h_sd2, real.h_rd, real.h_sr)
    tb = _product_tables(pt)
    m = pt.base.constellation.M
    pts = es_amp * pt.base.constellation.points
    B, L = y_d1.shape

    def stage(t):
        a = np.abs(y_d1[:, t, None] - h_sd1[:, t, None] * pts[None, :]) ** 2
        bt = np.abs(
            y_d2[:, t, None, None]
            - h_sd2[:, t, None, None] * pts[None, :, None]
            - h_rd[:, t, None, None] * pts[None, None, :]
        ) ** 2
        sr_pen = 0.25 * es_amp**2 * np.abs(h_sr[:, t]) ** 2
        return (
            a[:, tb.in_is1a]
            + bt.reshape(B, m * m)[:, tb.in_bt]
            + sr_pen[:, None] * tb.in_d_s1[None, :]
        )

    surv, metric = _viterbi(stage, tb.n_states, tb.k_in, tb.in_src, B, L)
    ua, ub = _traceback(surv, tb.in_src, [tb.in_ua, tb.in_ub], tb.k_in)
    return ua, ub, metric[:, 0]


def ideal_ml_decode_batch(lt: LabelledTrellis, y_d1, y_d2, real: ChannelRealization,
                          es_amp: float = 1.0):
    """Genie decoder: the relay is assumed to have re-encoded the true path,
    so decoding runs on the base trellis."""
    y_d1, y_d2 = _as_batch(y_d1, y_d2)
    h_sd1, h_sd2, h_rd = _as_batch(real.h_sd1, real.h_sd2, real.h_rd)
    tb = _base_tables(lt)
    m = lt.constellation.M
    pts = es_amp * lt.constellation.points
    B, L = y_d1.shape

    def stage(t):
        a = np.abs(y_d1[:, t, None] - h_sd1[:, t, None] * pts[None, :]) ** 2
        bt = np.abs(
            y_d2[:, t, None, None]
            - h_sd2[:, t, None, None] * pts[None, :, None]
            - h_rd[:, t, None, None] * pts[None, None, :]
        ) ** 2
        return a[:, tb.in_is1] + bt.reshape(B, m * m)[:, tb.in_is2 * m + tb.in_ir]

    surv, metric = _viterbi(stage, tb.n_states, tb.k_in, tb.in_src, B, L)
    (inputs,) = _traceback(surv, tb.in_src, [tb.in_u], tb.k_in)
    return inputs, metric[:, 0]


# ---------------------------------------------------------------------------
# single-frame wrappers
# ---------------------------------------------------------------------------

def _ops(n_states, k_in, L) -> int:
    # per stage: one addition per in-edge, a (k_in-1)-way comparison per state
    return L * (n_states * k_in + n_states * (k_in - 1))


def relay_decode(lt: LabelledTrellis, y_r, h_sr, es_amp: float = 1.0) -> DecodeResult:
    inputs, metric = relay_decode_batch(lt, y_r, h_sr, es_amp)
    path = Path(trellis=lt.trellis, inputs=inputs[0])
    t = lt.trellis
    return DecodeResult(
        path=path,
        metric=float(metric[0]),
        op_count=_ops(t.n_states, t.n_inputs, len(path)),
    )


def near_ml_decode(pt: ProductTrellis, y_d1, y_d2, real: ChannelRealization,
                   es_amp: float = 1.0) -> DecodeResult:
    ua, ub, metric = near_ml_decode_batch(pt, y_d1, y_d2, real, es_amp)
    t = pt.base.trellis
    return DecodeResult(
        path=Path(trellis=t, inputs=ua[0]),
        metric=float(metric[0]),
        op_count=_ops(pt.n_states, pt.n_edges_per_state, ua.shape[1]),
        relay_path=Path(trellis=t, inputs=ub[0]),
    )


def ideal_ml_decode(lt: LabelledTrellis, y_d1, y_d2, real: ChannelRealization,
                    es_amp: float = 1.0) -> DecodeResult:
    inputs, metric = ideal_ml_decode_batch(lt, y_d1, y_d2, real, es_amp)
    t = lt.trellis
    return DecodeResult(
        path=Path(trellis=t, inputs=inputs[0]),
        metric=float(metric[0]),
        op_count=_ops(t.n_states, t.n_inputs, inputs.shape[1]),
    )


# ---------------------------------------------------------------------------
# path-metric evaluation and brute-force oracles
# ---------------------------------------------------------------------------

def metric_relay(lt, path: Path, y_r, h_sr, es_amp: float = 1.0) -> float:
    x = es_amp * path.symbols(lt, "s1")
    return float(np.sum(np.abs(np.asarray(y_r) - np.asarray(h_sr) * x) ** 2))


def metric_joint(lt, p_s: Path, p_r: Path, y_d1, y_d2, real: ChannelRealization,
                 es_amp: float = 1.0) -> float:
    """Accumulated near-ML metric of a specific (source, relay) path pair."""
    xs1 = es_amp * p_s.symbols(lt, "s1")
    xs2 = es_amp * p_s.symbols(lt, "s2")
    xr = es_amp * p_r.symbols(lt, "r")
    xs1_r = es_amp * p_r.symbols(lt, "s1")
    t1 = np.abs(y_d1 - real.h_sd1 * xs1) ** 2
    t2 = np.abs(y_d2 - real.h_sd2 * xs2 - real.h_rd * xr) ** 2
    t3 = 0.25 * np.abs(real.h_sr * (xs1 - xs1_r)) ** 2
    return float(np.sum(t1 + t2 + t3))


def metric_ideal(lt, p_s: Path, y_d1, y_d2, real: ChannelRealization,
                 es_amp: float = 1.0) -> float:
    xs1 = es_amp * p_s.symbols(lt, "s1")
    xs2 = es_amp * p_s.symbols(lt, "s2")
    xr = es_amp * p_s.symbols(lt, "r")
    t1 = np.abs(y_d1 - real.h_sd1 * xs1) ** 2
    t2 = np.abs(y_d2 - real.h_sd2 * xs2 - real.h_rd * xr) ** 2
    return float(np.sum(t1 + t2))


def brute_force_relay(lt, y_r, h_sr, L: int, es_amp: float = 1.0):
    paths = enumerate_paths(lt.trellis, L)
    metrics = [metric_relay(lt, p, y_r, h_sr, es_amp) for p in paths]
    i = int(np.argmin(metrics))
    return paths[i], metrics[i]

def brute_force_near_ml(lt, y_d1, y_d2, real: ChannelRealization, L: int,
                        es_amp: float = 1.0):
    """Exhaustive minimization over all (source, relay) path pairs."""
    paths = enumerate_paths(lt.trellis, L)
    pts = es_amp * lt.constellation.points
    xs1 = pts[np.array([p.symbol_indices(lt, "s1") for p in paths])]
    xs2 = pts[np.array([p.symbol_indices(lt, "s2") for p in paths])]
    xr = pts[np.array([p.symbol_indices(lt, "r") for p in paths])]
    t1 = np.sum(np.abs(y_d1[None, :] - real.h_sd1[None, :] * xs1) ** 2, axis=1)
    t2 = np.sum(
        np.abs(
            y_d2[None, None, :]
            - real.h_sd2[None, None, :] * xs2[:, None, :]
            - real.h_rd[None, None, :] * xr[None, :, :]
        ) ** 2,
        axis=2,
    )
    t3 = np.sum(
        0.25 * np.abs(real.h_sr[None, None, :]
                      * (xs1[:, None, :] - xs1[None, :, :])) ** 2,
        axis=2,
    )
    total = t1[:, None] + t2 + t3
    i, j = np.unravel_index(np.argmin(total), total.shape)
    return paths[i], paths[j], float(total[i, j])


def brute_force_ideal(lt, y_d1, y_d2, real: ChannelRealization, L: int,
                      es_amp: float = 1.0):
    paths = enumerate_paths(lt.trellis, L)
    metrics = [metric_ideal(lt, p, y_d1, y_d2, real, es_amp) for p in paths]
    i = int(np.argmin(metrics))
    return paths[i], metrics[i]
