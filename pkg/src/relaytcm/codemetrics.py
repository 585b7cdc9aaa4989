"""Design-criteria computations: eta sets, effective lengths, product
distances, coding-gain metrics, diversity bounds and the uncoded labelling
gain.

Positions in eta sets are 0-based branch indices.  All trellis-level minima
enumerate diverge-remerge path-pair events up to a branch horizon (default
4N, verified against 8N for the shipped codes).

The generalized product distance is exposed in two forms: the exact product
of per-position sums, and the small-gamma split m2 = m21 + m22 (relay product
plus gamma-weighted source Phase-2 product).  The coding-gain metric uses the
split form; that is the form whose minima the shipped catalog codes are pinned
against.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np

from .constellation import Constellation, Labelling
from .trellis import LabelledTrellis, Path, Trellis, code_unmerged_length

__all__ = [
    "GammaRatio",
    "PathPairMetrics",
    "CodingGain",
    "eta_set",
    "effective_length",
    "generalized_effective_length",
    "product_distance_m1",
    "generalized_product_distance_m2",
    "pair_metrics",
    "coding_gain",
    "diversity_bounds",
    "min_diversity_pairs",
    "uncoded_metric_d",
    "labelling_gain",
    "labelling_gain_closed_form",
    "analyze_code",
]


class EnumerationBudgetError(RuntimeError):
    """Raised when the pair-event search exceeds its node budget."""


class EmptyEtaError(ValueError):
    """Product distance requested over an empty eta set."""


class DiversityPreconditionError(ValueError):
    """Sufficient condition for maximum diversity fails for a trellis."""

    def __init__(self, which: str, effective: int, unmerged: int):
        self.which = which
        self.effective = effective
        self.unmerged = unmerged
        super().__init__(
            f"effective length of trellis {which} is {effective}, "
            f"but the code unmerged length is {unmerged}"
        )


@dataclass(frozen=True)
class GammaRatio:
    """Ratio of S-D to R-D fade variances."""

    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma >= 1:
            warnings.warn(
                f"gamma={self.gamma} >= 1; the analysis assumes the S-D link "
                "is much weaker than the R-D link",
                stacklevel=2,
            )


@dataclass(frozen=True)
class PathPairMetrics:
    eta_s1: frozenset
    eta_s2: frozenset
    eta_r: frozenset
    m1: float
    m21: float
    m22: float
    m2: float          # split form m21 + m22
    m2_exact: float    # exact product of (gamma*|ds2|^2 + |dr|^2)
    m: float           # m1 * m2
    gel: int
    div_lower: int
    div_upper: int
    div_equal: bool


@dataclass(frozen=True)
class CodingGain:
    G: float
    G1: float
    G2: float
    gamma: float
    unmerged_length: int
    effective_length_s1: int


def eta_set(lt: LabelledTrellis, p1: Path, p2: Path, which: str) -> frozenset:
    """Branch positions where the two paths transmit different symbols."""
    a = p1.symbol_indices(lt, which)
    b = p2.symbol_indices(lt, which)
    if a.shape != b.shape:
        raise ValueError("paths must have equal length")
    return frozenset(np.flatnonzero(a != b).tolist())


def _dist2_table(c: Constellation) -> np.ndarray:
    return np.abs(c.points[:, None] - c.points[None, :]) ** 2


# ---------------------------------------------------------------------------
# Diverge-remerge event enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Event:
    """One diverge-remerge event between two paths.

    branches[i] = ((state_a, u_a), (state_b, u_b)); the first branch diverges
    from a common state, the last lands both on a common state.
    """

    diverge_state: int
    branches: tuple

    def label_pairs(self, lt: LabelledTrellis, which: str):
        lab = lt.labels(which)
        return [(int(lab[ea]), int(lab[eb])) for ea, eb in self.branches]


def _zero_closure(lt: LabelledTrellis) -> dict:
    """Label-preserving reachability between ordered state pairs.

    A step is distance-free when the two edges carry equal symbols under all
    three maps; runs of such steps change neither eta sets nor products, so
    events are enumerated modulo them.  Returns, per ordered pair (a, b) with
    a != b, the list of (pair', canonical shortest zero-run) entries,
    including ((a, b), ()) itself.
    """
    t = lt.trellis
    nxt = t.next_state
    k = t.n_inputs
    xs1, xs2, xr = lt.x_s1, lt.x_s2, lt.x_r

    zero_edges: dict[tuple, list] = {}
    for a in range(t.n_states):
        for b in range(t.n_states):
            if a == b:
                continue
            lst = []
            for ua in range(k):
                for ub in range(k):
                    if (
                        xs1[a, ua] == xs1[b, ub]
                        and xs2[a, ua] == xs2[b, ub]
                        and xr[a, ua] == xr[b, ub]
                    ):
                        na, nb = int(nxt[a, ua]), int(nxt[b, ub])
                        if na != nb:
                            lst.append((((a, ua), (b, ub)), (na, nb)))
            zero_edges[(a, b)] = lst

    closure = {}
    for start in zero_edges:
        reach = {start: ()}
        frontier = deque([start])
        while frontier:
            node = frontier.popleft()
            path = reach[node]
            for branch, nxt_pair in zero_edges[node]:
                if nxt_pair not in reach:
                    reach[nxt_pair] = path + (branch,)
                    frontier.append(nxt_pair)
        closure[start] = list(reach.items())
    return closure


class _PairGraph:
    """Per-trellis machinery for event enumeration: counted steps, zero-run
    closures, and minimum remaining-cost tables used for pruning."""

    def __init__(self, lt: LabelledTrellis):
        t = lt.trellis
        n, k = t.n_states, t.n_inputs
        nxt = t.next_state
        xs1, xs2, xr = lt.x_s1, lt.x_s2, lt.x_r
        self.closure = _zero_closure(lt)

        # per ordered pair: counted steps (some label differs) and
        # zero-distance remerging steps
        self.steps: dict[tuple, list] = {}
        self.zero_merges: dict[tuple, list] = {}
        nodes = [(a, b) for a in range(n) for b in range(n) if a != b]
        for a, b in nodes:
            counted = []
            zmerge = []
            for ua in range(k):
                la1, la2, lar = xs1[a, ua], xs2[a, ua], xr[a, ua]
                na = int(nxt[a, ua])
                for ub in range(k):
                    d1 = int(la1 != xs1[b, ub])
                    dg = int((la2 != xs2[b, ub]) or (lar != xr[b, ub]))
                    nb = int(nxt[b, ub])
                    if d1 == 0 and dg == 0:
                        if na == nb:
                            zmerge.append(((a, ua), (b, ub)))
                        continue
                    counted.append((d1, dg, na, nb, ((a, ua), (b, ub))))
            self.steps[(a, b)] = counted
            self.zero_merges[(a, b)] = zmerge

        # minimum additional (d1, dg) cost to complete a remerge from a node,
        # over steps including the remerging one (zero steps are free)
        self.min_d1 = self._min_cost(nodes, 0)
        self.min_dg = self._min_cost(nodes, 1)

    def _min_cost(self, nodes, which) -> dict:
        import heapq

        inf = float("inf")
        dist = {node: inf for node in nodes}
        heap = []
        for node in nodes:
            best = inf
            if self.zero_merges[node]:
                best = 0
            for step in self.steps[node]:
                if step[2] == step[3]:
                    best = min(best, step[which])
            if best < inf:
                dist[node] = best
                heapq.heappush(heap, (best, node))
        # relax backwards over incoming steps: cost(node) <= w + cost(succ)
        incoming: dict[tuple, list] = {node: [] for node in nodes}
        for node in nodes:
            for step in self.steps[node]:
                if step[2] != step[3]:
                    incoming[(step[2], step[3])].append((node, step[which]))
            for node2, zrun in self.closure[node]:
                if node2 != node:
                    incoming[node2].append((node, 0))
        while heap:
            d, node = heapq.heappop(heap)
            if d > dist[node]:
                continue
            for prev, w in incoming[node]:
                nd = d + w
                if nd < dist[prev]:
                    dist[prev] = nd
                    heapq.heappush(heap, (nd, prev))
        return dist


def _enumerate_events(
    lt: LabelledTrellis,
    cap_s1: int | None = None,
    cap_gel: int | None = None,
    horizon: int | None = None,
    node_budget: int = 20_000_000,
    graph: _PairGraph | None = None,
):
    """DFS over diverge-remerge events, pruned by eta-count caps.

    Runs of distance-free branch pairs (equal symbols under all three maps)
    are collapsed: every event family differing only in such runs is
    represented by its member with canonical shortest runs.  The caps bound
    the eta_s1 count and the generalized effective length; ``horizon`` bounds
    the branch count of the canonical representative.  The diverging edge
    pair is ordered u_a < u_b, so each unordered path pair appears once.
    """
    t = lt.trellis
    if horizon is None:
        horizon = 4 * t.n_states
    xs1, xs2, xr = lt.x_s1, lt.x_s2, lt.x_r
    nxt = t.next_state
    k = t.n_inputs
    big = 10 ** 9
    c1 = cap_s1 if cap_s1 is not None else big
    cg = cap_gel if cap_gel is not None else big
    g = graph if graph is not None else _PairGraph(lt)
    budget = node_budget

    out: list[_Event] = []

    def rec(node, n1, ng, depth, s0, branches):
        nonlocal budget
        for node2, zrun in g.closure[node]:
            d2 = depth + len(zrun)
            if d2 + 1 > horizon:
                continue
            base = None
            for step in g.zero_merges[node2]:
                if base is None:
                    base = branches + list(zrun)
                out.append(_Event(s0, tuple(base + [step])))
            for d1, dg, na, nb, step in g.steps[node2]:
                budget -= 1
                if budget < 0:
                    raise EnumerationBudgetError(
                        "pair-event enumeration exceeded its node budget; "
                        "reduce the horizon or the enumeration caps"
                    )
                m1c, mgc = n1 + d1, ng + dg
                if m1c > c1 or mgc > cg:
                    continue
                if na == nb:
                    if base is None:
                        base = branches + list(zrun)
                    out.append(_Event(s0, tuple(base + [step])))
                    continue
                child = (na, nb)
                if m1c + g.min_d1[child] > c1 or mgc + g.min_dg[child] > cg:
                    continue
                if base is None:
                    base = branches + list(zrun)
                rec(child, m1c, mgc, d2 + 1, s0, base + [step])

    for s in range(t.n_states):
        for ua in range(k):
            for ub in range(ua + 1, k):
                d1 = int(xs1[s, ua] != xs1[s, ub])
                dg = int((xs2[s, ua] != xs2[s, ub]) or (xr[s, ua] != xr[s, ub]))
                if d1 > c1 or dg > cg:
                    continue
                na, nb = int(nxt[s, ua]), int(nxt[s, ub])
                step = ((s, ua), (s, ub))
                if na == nb:
                    out.append(_Event(s, (step,)))
                    continue
                child = (na, nb)
                if (
                    d1 + g.min_d1[child] > c1
                    or dg + g.min_dg[child] > cg
                ):
                    continue
                rec(child, d1, dg, 1, s, [step])
    return out


def _event_counts(lt: LabelledTrellis, ev: _Event) -> tuple[int, int, int, int]:
    n1 = n2 = nr = ng = 0
    for (sa, ua), (sb, ub) in ev.branches:
        d1 = lt.x_s1[sa, ua] != lt.x_s1[sb, ub]
        d2 = lt.x_s2[sa, ua] != lt.x_s2[sb, ub]
        dr = lt.x_r[sa, ua] != lt.x_r[sb, ub]
        n1 += d1
        n2 += d2
        nr += dr
        ng += d2 or dr
    return n1, n2, nr, ng


def _event_products(lt: LabelledTrellis, ev: _Event) -> tuple[float, float, float]:
    """(m1, relay product over the union set, s2 product over the union set)."""
    d2tab = _dist2_table(lt.constellation)
    m1 = 1.0
    pr = 1.0
    ps2 = 1.0
    for (sa, ua), (sb, ub) in ev.branches:
        l1a, l1b = lt.x_s1[sa, ua], lt.x_s1[sb, ub]
        l2a, l2b = lt.x_s2[sa, ua], lt.x_s2[sb, ub]
        lra, lrb = lt.x_r[sa, ua], lt.x_r[sb, ub]
        if l1a != l1b:
            m1 *= d2tab[l1a, l1b]
        if (l2a != l2b) or (lra != lrb):
            pr *= d2tab[lra, lrb]
            ps2 *= d2tab[l2a, l2b]
    return m1, pr, ps2


def effective_length(lt: LabelledTrellis, which: str, horizon: int | None = None) -> int:
    """Minimum count of differing-symbol positions over diverge-remerge pairs.

    Bellman-Ford over ordered state pairs with 0/1 step weights; iteration k
    covers events of k branches, so the horizon bound is exact.
    """
    t = lt.trellis
    if horizon is None:
        horizon = 4 * t.n_states
    lab = lt.labels(which)
    n, k = t.n_states, t.n_inputs
    nxt = t.next_state
    inf = np.iinfo(np.int64).max // 2
    dist = np.full((n, n), inf, dtype=np.int64)
    best = inf

    # diverge step
    for s in range(n):
        for ua in range(k):
            for ub in range(k):
                if ua == ub:
                    continue
                w = int(lab[s, ua] != lab[s, ub])
                na, nb = nxt[s, ua], nxt[s, ub]
                if na == nb:
                    best = min(best, w)
                elif w < dist[na, nb]:
                    dist[na, nb] = w

    for _ in range(horizon - 1):
        changed = False
        ndist = dist.copy()
        pairs = np.argwhere(dist < inf)
        for a, b in pairs:
            base = dist[a, b]
            if base >= best:
                continue
            for ua in range(k):
                for ub in range(k):
                    w = base + int(lab[a, ua] != lab[b, ub])
                    na, nb = nxt[a, ua], nxt[b, ub]
                    if na == nb:
                        if w < best:
                            best = w
                            changed = True
                    elif w < ndist[na, nb]:
                        ndist[na, nb] = w
                        changed = True
        dist = ndist
        if not changed:
            break
    if best >= inf:
        raise ValueError("no remerging pair found within horizon")
    return int(best)


def generalized_effective_length(lt: LabelledTrellis, p1: Path, p2: Path) -> int:
    """|eta_s2 union eta_r| for a specific path pair."""
    return len(eta_set(lt, p1, p2, "s2") | eta_set(lt, p1, p2, "r"))


def product_distance_m1(lt: LabelledTrellis, p1: Path, p2: Path) -> float:
    eta = eta_set(lt, p1, p2, "s1")
    if not eta:
        raise EmptyEtaError("eta_s1 is empty; product distance undefined")
    d2 = _dist2_table(lt.constellation)
    a = p1.symbol_indices(lt, "s1")
    b = p2.symbol_indices(lt, "s1")
    return float(np.prod([d2[a[i], b[i]] for i in sorted(eta)]))


def generalized_product_distance_m2(
    lt: LabelledTrellis, p1: Path, p2: Path, gamma: float
) -> float:
    """Exact product of (gamma*|ds2|^2 + |dr|^2) over the union eta set."""
    eta = eta_set(lt, p1, p2, "s2") | eta_set(lt, p1, p2, "r")
    if not eta:
        raise EmptyEtaError("eta_s2 union eta_r is empty; product distance undefined")
    d2 = _dist2_table(lt.constellation)
    a2 = p1.symbol_indices(lt, "s2")
    b2 = p2.symbol_indices(lt, "s2")
    ar = p1.symbol_indices(lt, "r")
    br = p2.symbol_indices(lt, "r")
    val = 1.0
    for i in sorted(eta):
        val *= gamma * d2[a2[i], b2[i]] + d2[ar[i], br[i]]
    return float(val)


def _split_products(lt: LabelledTrellis, p1: Path, p2: Path) -> tuple[float, float, set]:
    """(relay product, s2 product) over the union eta set, plus the set."""
    eta = eta_set(lt, p1, p2, "s2") | eta_set(lt, p1, p2, "r")
    d2 = _dist2_table(lt.constellation)
    a2 = p1.symbol_indices(lt, "s2")
    b2 = p2.symbol_indices(lt, "s2")
    ar = p1.symbol_indices(lt, "r")
    br = p2.symbol_indices(lt, "r")
    pr = 1.0
    ps2 = 1.0
    for i in sorted(eta):
        pr *= d2[ar[i], br[i]]
        ps2 *= d2[a2[i], b2[i]]
    return pr, ps2, eta


def diversity_bounds(lt: LabelledTrellis, p1: Path, p2: Path) -> tuple[int, int, bool]:
    """Per-pair diversity-order bounds (lower, upper, tight).

    tight is True iff eta_r is a subset of eta_s2, in which case both bounds
    coincide with the actual diversity order.
    """
    if p1 == p2:
        raise ValueError("paths must be distinct")
    e1 = eta_set(lt, p1, p2, "s1")
    e2 = eta_set(lt, p1, p2, "s2")
    er = eta_set(lt, p1, p2, "r")
    lower = len(e1) + len(e2)
    upper = min(len(e1) + len(e2 | er), 2 * len(e1) + len(e2))
    return lower, upper, er <= e2


def pair_metrics(lt: LabelledTrellis, p1: Path, p2: Path, gamma: float) -> PathPairMetrics:
    if p1 == p2:
        raise ValueError("paths must be distinct")
    GammaRatio(gamma)
    e1 = eta_set(lt, p1, p2, "s1")
    e2 = eta_set(lt, p1, p2, "s2")
    er = eta_set(lt, p1, p2, "r")
    m1 = product_distance_m1(lt, p1, p2)
    pr, ps2, eta_u = _split_products(lt, p1, p2)
    if not eta_u:
        raise EmptyEtaError("eta_s2 union eta_r is empty")
    m21 = pr
    m22 = gamma * ps2
    m2 = m21 + m22
    lower, upper, eq = diversity_bounds(lt, p1, p2)
    return PathPairMetrics(
        eta_s1=e1,
        eta_s2=e2,
        eta_r=er,
        m1=m1,
        m21=m21,
        m22=m22,
        m2=m2,
        m2_exact=generalized_product_distance_m2(lt, p1, p2, gamma),
        m=m1 * m2,
        gel=len(e2 | er),
        div_lower=lower,
        div_upper=upper,
        div_equal=eq,
    )


def coding_gain(
    lt: LabelledTrellis, gamma: float, horizon: int | None = None
) -> CodingGain:
    """Coding-gain metrics of the trellis triplet.

    G1 minimizes the Phase-1 product distance over pairs attaining the
    effective length of the Phase-1 trellis; G2 and G minimize over pairs
    whose eta_s1 count and generalized effective length both equal the code
    unmerged length.
    """
    GammaRatio(gamma)
    t = lt.trellis
    u = code_unmerged_length(t, horizon)
    el1 = effective_length(lt, "s1", horizon)
    graph = _PairGraph(lt)

    g1 = None
    for ev in _enumerate_events(lt, cap_s1=el1, horizon=horizon, graph=graph):
        n1, _, _, _ = _event_counts(lt, ev)
        if n1 != el1:
            continue
        m1, _, _ = _event_products(lt, ev)
        g1 = m1 if g1 is None else min(g1, m1)

    g2 = None
    g = None
    for ev in _enumerate_events(lt, cap_s1=u, cap_gel=u, horizon=horizon, graph=graph):
        n1, _, _, ng = _event_counts(lt, ev)
        if n1 != u or ng != u:
            continue
        m1, pr, ps2 = _event_products(lt, ev)
        cand2 = m1 * pr
        cand = m1 * (pr + gamma * ps2)
        g2 = cand2 if g2 is None else min(g2, cand2)
        g = cand if g is None else min(g, cand)

    if g1 is None or g is None:
        raise ValueError("horizon too small: no qualifying path pair found")
    return CodingGain(
        G=g, G1=g1, G2=g2, gamma=gamma, unmerged_length=u, effective_length_s1=el1
    )


def _event_to_paths(t: Trellis, ev: _Event) -> tuple[Path, Path]:
    """Embed an event into a terminated path pair sharing prefix and tail."""
    prefix = t.shortest_inputs_to(ev.diverge_state)
    ua_seq = [ua for (_, ua), _ in ev.branches]
    ub_seq = [ub for _, (_, ub) in ev.branches]
    # state after remerge
    (sa, ua_last) = ev.branches[-1][0]
    merge = int(t.next_state[sa, ua_last])
    tail = []
    cur = merge
    while cur != 0:
        tail.append(0)
        cur = int(t.next_state[cur, 0])
    pa = Path(trellis=t, inputs=np.array(prefix + ua_seq + tail, dtype=np.int64))
    pb = Path(trellis=t, inputs=np.array(prefix + ub_seq + tail, dtype=np.int64))
    return pa, pb


def min_diversity_pairs(
    lt: LabelledTrellis, horizon: int | None = None
) -> list[tuple[Path, Path]]:
    """All path pairs contributing to the minimum diversity order.

    Requires the sufficient full-diversity condition: the effective lengths of
    the Phase-1 and Phase-2 source trellises equal the code unmerged length.
    """
    t = lt.trellis
    u = code_unmerged_length(t, horizon)
    for which in ("s1", "s2"):
        el = effective_length(lt, which, horizon)
        if el != u:
            raise DiversityPreconditionError(which, el, u)
    pairs = []
    for ev in _enumerate_events(lt, cap_s1=u, cap_gel=u, horizon=horizon):
        n1, _, _, ng = _event_counts(lt, ev)
        if n1 == u and ng == u:
            pairs.append(_event_to_paths(t, ev))
    return pairs


# ---------------------------------------------------------------------------
# Uncoded transmission scheme
# ---------------------------------------------------------------------------

def uncoded_metric_d(
    labellings: tuple[Labelling, Labelling, Labelling],
    constellation: Constellation,
    gamma: float,
) -> float:
    """Worst-case high-SNR pair metric of an uncoded labelling scheme."""
    x1, x2, xr = labellings
    d2 = _dist2_table(constellation)
    best = np.inf
    for a, abar in iproduct(range(constellation.M), repeat=2):
        if a == abar:
            continue
        val = d2[x1(a), x1(abar)] * (gamma * d2[x2(a), x2(abar)] + d2[xr(a), xr(abar)])
        best = min(best, val)
    return float(best)


def _scheme_triple(scheme, M: int):
    from .constellation import bar_labelling, identity_labelling

    if isinstance(scheme, tuple):
        return scheme
    if scheme == "bar":
        return (identity_labelling(M), identity_labelling(M), bar_labelling(M))
    if scheme in ("constant", "identity"):
        ident = identity_labelling(M)
        return (ident, ident, ident)
    raise ValueError(f"unknown labelling scheme {scheme!r}")


def labelling_gain(scheme, constellation: Constellation, gamma: float) -> float:
    """Gain in dB of a labelling scheme over constant labelling."""
    if gamma >= 0.1:
        warnings.warn(
            f"labelling gain assumes gamma << 1 (got {gamma})", stacklevel=2
        )
    triple = _scheme_triple(scheme, constellation.M)
    from .constellation import identity_labelling

    ident = identity_labelling(constellation.M)
    d_scheme = uncoded_metric_d(triple, constellation, gamma)
    d_const = uncoded_metric_d((ident, ident, ident), constellation, gamma)
    return float(10 * np.log10(d_scheme / d_const))


def labelling_gain_closed_form(M: int) -> float:
    """High-SNR labelling gain of the even/odd antipodal relay map, in dB."""
    val = min(1 / np.tan(np.pi / M), 4 * np.cos(np.pi / M) ** 2)
    return float(20 * np.log10(val))


def analyze_code(lt: LabelledTrellis, gamma: float, horizon: int | None = None) -> dict:
    """Summary report used by the ``analyze`` CLI subcommand."""
    t = lt.trellis
    u = code_unmerged_length(t, horizon)
    cg = coding_gain(lt, gamma, horizon)
    try:
        pairs = min_diversity_pairs(lt, horizon)
        pair_count = len(pairs)
        div = None
        if pairs:
            lo, up, _ = diversity_bounds(lt, *pairs[0])
            div = lo if lo == up else None
    except DiversityPreconditionError:
        pair_count = None
        div = None
    return {
        "code": lt.name,
        "n_states": t.n_states,
        "branches_per_state": t.n_inputs,
        "constellation_size": lt.constellation.M,
        "unmerged_length": u,
        "effective_length_s1": effective_length(lt, "s1", horizon),
        "effective_length_s2": effective_length(lt, "s2", horizon),
        "effective_length_r": effective_length(lt, "r", horizon),
        "gamma": gamma,
        "G1": cg.G1,
        "G2": cg.G2,
        "G": cg.G,
        "min_diversity_pair_count": pair_count,
        "diversity_order": div,
    }
