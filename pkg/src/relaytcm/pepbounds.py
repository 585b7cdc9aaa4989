"""Analytic pairwise-error-probability machinery.

Includes the mismatched-offset Gaussian decision bound, the full PEP upper
bound for the joint decoder (with its relay-hypothesis correction sum), the
constant-free dominant-term bound for minimum-diversity pairs, the uncoded
two-hop PEP bound, and Monte-Carlo estimators used to confirm domination.

All deterministic bounds take the symbol-energy scale from ChannelParams and
apply it to the unit-energy constellation points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, draw_realization, es_scale, phase1, phase2
from .codemetrics import eta_set
from .constellation import Constellation, Labelling
from .decoder import _base_tables, _viterbi, metric_relay, relay_decode_batch
from .trellis import LabelledTrellis, Path, enumerate_paths, unmerged_length

__all__ = [
    "PepReport",
    "lemma1_bound",
    "mc_lemma1",
    "q_function",
    "q_exp_bound",
    "pep_full",
    "pep_dominant",
    "uncoded_pep_bound",
    "pep_report",
    "mc_pep_estimate",
]


def q_function(x) -> np.ndarray:
    """Standard Gaussian tail probability."""
    from math import erfc

    x = np.asarray(x, dtype=float)
    return np.vectorize(lambda v: 0.5 * erfc(v / np.sqrt(2)))(x)


def q_exp_bound(x) -> np.ndarray:
    """The loose exponential tail bound Q(x) <= exp(-x^2) used by the
    analytic chain (kept verbatim; the tighter (1/2)exp(-x^2/2) is not
    used)."""
    return np.exp(-np.asarray(x, dtype=float) ** 2)


def lemma1_bound(x1, x2, c: float) -> float:
    """Probability that an offset-c minimum-distance rule picks message 2.

    Bound: (1/2) exp(-||x1-x2||^2/4 - c/2), clipped to [0, 1].
    """
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    if x1.shape != x2.shape:
        raise ValueError("x1 and x2 must have equal dimension")
    d2 = float(np.sum(np.abs(x1 - x2) ** 2))
    return float(np.clip(0.5 * np.exp(-d2 / 4 - c / 2), 0.0, 1.0))


def mc_lemma1(x1, x2, c: float, n_trials: int, rng: np.random.Generator):
    """Monte-Carlo rate of the offset decision rule under message 1."""
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    n = x1.size
    z = (rng.standard_normal((n_trials, n)) + 1j * rng.standard_normal((n_trials, n))) / np.sqrt(2)
    y = x1[None, :] + z
    m1 = np.sum(np.abs(y - x1[None, :]) ** 2, axis=1)
    m2 = np.sum(np.abs(y - x2[None, :]) ** 2, axis=1)
    errs = int(np.sum(m1 > m2 + c))
    p = errs / n_trials
    return p, np.sqrt(max(p * (1 - p), 1e-300) / n_trials)


def _scaled_symbols(lt, path: Path, which: str, amp: float) -> np.ndarray:
    return amp * path.symbols(lt, which)


def pep_full(
    lt: LabelledTrellis,
    p_s: Path,
    p_s_tilde: Path,
    params: ChannelParams,
    horizon_r: int | None = None,
) -> float:
    """Full PEP upper bound for the joint decoder.

    First term: the relay-decoded-correctly factor pair.  Correction: double
    sum over relay-decode hypotheses (P_R != P_S, P_R~ != P_S~), enumerated
    over all terminated paths whose unmerged span from the corresponding
    source path is within ``horizon_r`` (exact for short frames).
    """
    if len(p_s) != len(p_s_tilde):
        raise ValueError("paths must have equal length")
    L = len(p_s)
    t = lt.trellis
    if horizon_r is None:
        horizon_r = 4 * t.n_states
    amp = es_scale(params)
    s_sd = np.sqrt(params.sigma2_sd)
    s_rd = np.sqrt(params.sigma2_rd)
    s_sr = np.sqrt(params.sigma2_sr)

    xs1 = _scaled_symbols(lt, p_s, "s1", amp)
    xs1_t = _scaled_symbols(lt, p_s_tilde, "s1", amp)
    xs2 = _scaled_symbols(lt, p_s, "s2", amp)
    xs2_t = _scaled_symbols(lt, p_s_tilde, "s2", amp)
    xr = _scaled_symbols(lt, p_s, "r", amp)
    xr_t = _scaled_symbols(lt, p_s_tilde, "r", amp)

    sd1 = 1.0 / (1.0 + np.abs(s_sd * (xs1 - xs1_t)) ** 2 / 4)
    e_s1 = sorted(eta_set(lt, p_s, p_s_tilde, "s1"))
    e_s2 = eta_set(lt, p_s, p_s_tilde, "s2")
    e_r = eta_set(lt, p_s, p_s_tilde, "r")
    fac_s1 = float(np.prod(sd1[e_s1]))

    first = fac_s1
    d_s2 = np.abs(s_sd * (xs2 - xs2_t)) ** 2
    d_r_pair = np.abs(s_rd * (xr - xr_t)) ** 2
    for i in sorted(e_s2 | e_r):
        first *= 1.0 / (1.0 + (d_s2[i] + d_r_pair[i]) / 4)

    # relay-hypothesis correction sum
    paths = enumerate_paths(t, L)
    cand_r = [p for p in paths if p != p_s and unmerged_length(p, p_s) <= horizon_r]
    cand_rt = [p for p in paths if p != p_s_tilde
               and unmerged_length(p, p_s_tilde) <= horizon_r]

    corr = 0.0
    for p_r in cand_r:
        xr_pr = _scaled_symbols(lt, p_r, "r", amp)
        xs1_pr = _scaled_symbols(lt, p_r, "s1", amp)
        sr_first = np.abs(s_sr * (xs1 - xs1_pr)) ** 2
        e_sr_first = eta_set(lt, p_s, p_r, "s1")
        for p_rt in cand_rt:
            xr_prt = _scaled_symbols(lt, p_rt, "r", amp)
            xs1_prt = _scaled_symbols(lt, p_rt, "s1", amp)
            term = fac_s1
            d_r = np.abs(s_rd * (xr_pr - xr_prt)) ** 2
            for i in sorted(e_s2 | eta_set(lt, p_r, p_rt, "r")):
                term *= 1.0 / (1.0 + (d_s2[i] + d_r[i]) / 4)
            sr_second = np.abs(s_sr * (xs1_prt - xs1_t)) ** 2
            for i in sorted(e_sr_first | eta_set(lt, p_s_tilde, p_rt, "s1")):
                term *= 1.0 / (1.0 + (sr_second[i] + sr_first[i]) / 8)
            corr += term
    return float(first + corr)


def pep_dominant(
    lt: LabelledTrellis, p_s: Path, p_s_tilde: Path, params: ChannelParams
) -> float:
    """Dominant-term PEP bound (constant-free, reported with K = 1).

    Only valid for minimum-diversity pairs: the eta_s1 count and the
    generalized effective length must equal the code unmerged length.
    """
    from .codemetrics import generalized_effective_length
    from .trellis import code_unmerged_length

    u = code_unmerged_length(lt.trellis)
    e_s1 = eta_set(lt, p_s, p_s_tilde, "s1")
    gel = generalized_effective_length(lt, p_s, p_s_tilde)
    if len(e_s1) != u or gel != u:
        raise ValueError(
            f"pair is not minimum-diversity: |eta_s1|={len(e_s1)}, "
            f"gel={gel}, unmerged length={u}"
        )
    amp = es_scale(params)
    s_sd = np.sqrt(params.sigma2_sd)
    s_rd = np.sqrt(params.sigma2_rd)
    xs1 = _scaled_symbols(lt, p_s, "s1", amp)
    xs1_t = _scaled_symbols(lt, p_s_tilde, "s1", amp)
    xs2 = _scaled_symbols(lt, p_s, "s2", amp)
    xs2_t = _scaled_symbols(lt, p_s_tilde, "s2", amp)
    xr = _scaled_symbols(lt, p_s, "r", amp)
    xr_t = _scaled_symbols(lt, p_s_tilde, "r", amp)
    val = 1.0
    for i in sorted(e_s1):
        val /= np.abs(s_sd * (xs1[i] - xs1_t[i])) ** 2
    e_u = eta_set(lt, p_s, p_s_tilde, "s2") | eta_set(lt, p_s, p_s_tilde, "r")
    for i in sorted(e_u):
        val /= (np.abs(s_sd * (xs2[i] - xs2_t[i])) ** 2
                + np.abs(s_rd * (xr[i] - xr_t[i])) ** 2)
    return float(val)


def uncoded_pep_bound(
    labellings: tuple[Labelling, Labelling, Labelling],
    constellation: Constellation,
    params: ChannelParams,
    a: int,
    a_bar: int,
) -> float:
    """PEP bound for the uncoded scheme: the diversity-2 term with the relay
    decoded correctly plus the fully enumerated relay-error double sum."""
    if a == a_bar:
        raise ValueError("messages must differ")
    x1map, x2map, xrmap = labellings
    amp = es_scale(params)
    pts = amp * constellation.points
    xs1 = pts[x1map.map]
    xs2 = pts[x2map.map]
    xr = pts[xrmap.map]
    s2sd = params.sigma2_sd
    s2rd = params.sigma2_rd
    s2sr = params.sigma2_sr
    M = constellation.M

    fac_sd1 = 1.0 / (1.0 + s2sd * np.abs(xs1[a] - xs1[a_bar]) ** 2 / 4)
    d_s2 = s2sd * np.abs(xs2[a] - xs2[a_bar]) ** 2

    total = 0.0
    # relay decoded the true message: sum over the destination's relay
    # hypothesis l
    for ell in range(M):
        f2 = 1.0 / (1.0 + (d_s2 + s2rd * np.abs(xr[a] - xr[ell]) ** 2) / 4)
        f3 = 1.0 / (1.0 + s2sr * np.abs(xs1[a_bar] - xs1[ell]) ** 2 / 8)
        total += fac_sd1 * f2 * f3
    # relay decoding errors
    for j in range(M):
        if j == a:
            continue
        for mm in range(M):
            f2 = 1.0 / (1.0 + (d_s2 + s2rd * np.abs(xr[j] - xr[mm]) ** 2) / 4)
            f3 = 1.0 / (
                1.0
                + s2sr * np.abs(xs1[a] - xs1[j]) ** 2 / 8
                + s2sr * np.abs(xs1[a_bar] - xs1[mm]) ** 2 / 8
            )
            total += fac_sd1 * f2 * f3
    return float(total)


@dataclass(frozen=True)
class PepReport:
    pair_id: str
    bound_full: float
    bound_dominant: float
    diversity_exponent: int
    snr_grid: list  # (es_db, bound_full, bound_dominant)


def pep_report(
    lt: LabelledTrellis,
    p_s: Path,
    p_s_tilde: Path,
    params: ChannelParams,
    es_grid_db,
    pair_id: str = "pair0",
) -> PepReport:
    """Evaluate the bounds over an energy grid and fit the diversity slope
    over the top decade of the grid."""
    rows = []
    for es in es_grid_db:
        p = ChannelParams(
            sigma2_sd=params.sigma2_sd,
            sigma2_sr=params.sigma2_sr,
            sigma2_rd=params.sigma2_rd,
            es_db=es,
        )
        rows.append((
            float(es),
            pep_full(lt, p_s, p_s_tilde, p),
            pep_dominant(lt, p_s, p_s_tilde, p),
        ))
    top = [r for r in rows if r[0] >= max(e for e, *_ in rows) - 10]
    es = np.array([r[0] for r in top]) / 10
    lf = np.log10([r[1] for r in top])
    slope = np.polyfit(es, lf, 1)[0]
    return PepReport(
        pair_id=pair_id,
        bound_full=rows[-1][1],
        bound_dominant=rows[-1][2],
        diversity_exponent=int(round(-slope)),
        snr_grid=rows,
    )


def _constrained_joint_min_batch(lt, source_path: Path, y_d1, y_d2, real, amp):
    """min over relay hypotheses of the joint metric with the source path
    fixed; vectorized over a batch of observations."""
    tb = _base_tables(lt)
    pts = amp * lt.constellation.points
    xs1_fix = amp * source_path.symbols(lt, "s1")
    xs2_fix = amp * source_path.symbols(lt, "s2")
    B, L = y_d2.shape

    def stage_fixed(t):
        bt = np.abs(
            y_d2[:, t, None] - real.h_sd2[:, t, None] * xs2_fix[t]
            - real.h_rd[:, t, None] * pts[None, :]
        ) ** 2
        pen = 0.25 * np.abs(real.h_sr[:, t, None] * (xs1_fix[t] - pts[None, :])) ** 2
        return bt[:, tb.in_ir] + pen[:, tb.in_is1]

    surv, metric = _viterbi(stage_fixed, tb.n_states, tb.k_in, tb.in_src, B, L)
    base = np.sum(np.abs(y_d1 - real.h_sd1 * xs1_fix[None, :]) ** 2, axis=1)
    return metric[:, 0] + base


def mc_pep_estimate(
    lt: LabelledTrellis,
    p_s: Path,
    p_s_tilde: Path,
    params: ChannelParams,
    n_trials: int,
    seed: int = 0,
    batch: int = 2048,
):
    """Monte-Carlo pairwise error rate of the joint decoder restricted to the
    two source hypotheses, with the relay running its true ML decode.

    Counts a pairwise error when the competing path's relay-minimized metric
    is no worse than the transmitted path's.  Returns (rate, stderr).
    """
    L = len(p_s)
    amp = es_scale(params)
    errs = 0
    done = 0
    trial = 0
    while done < n_trials:
        b = min(batch, n_trials - done)
        real = draw_realization(params, L, seed=seed, trial=trial, batch=b)
        xs1 = amp * p_s.symbols(lt, "s1")
        y_r, y_d1 = phase1(np.broadcast_to(xs1, (b, L)), real)
        relay_inputs, _ = relay_decode_batch(lt, y_r, real.h_sr, amp)
        # relay transmits its decoded path
        xr_lab = lt.labels("r").ravel()
        states = np.zeros(b, dtype=np.int64)
        xr_sym = np.empty((b, L), dtype=complex)
        k = lt.trellis.n_inputs
        for t in range(L):
            e = states * k + relay_inputs[:, t]
            xr_sym[:, t] = lt.constellation.points[xr_lab[e]]
            states = lt.trellis.next_state.ravel()[e]
        xs2 = amp * p_s.symbols(lt, "s2")
        y_d2 = phase2(np.broadcast_to(xs2, (b, L)), amp * xr_sym, real)
        m_true = _constrained_joint_min_batch(lt, p_s, y_d1, y_d2, real, amp)
        m_tilde = _constrained_joint_min_batch(lt, p_s_tilde, y_d1, y_d2, real, amp)
        errs += int(np.sum(m_tilde <= m_true))
        done += b
        trial += 1
    p = errs / n_trials
    return p, np.sqrt(max(p * (1 - p), 1e-300) / n_trials)
