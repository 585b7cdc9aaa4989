"""Trellis representation, encoding, path utilities and the product trellis.

A trellis is a time-invariant state machine with N states and K input symbols
per state.  Edges are identified by (state, input); the input symbol u selects
the u-th outgoing edge in data-file order.  A labelled trellis attaches three
edge-to-constellation-index maps: the source Phase-1 map, the source Phase-2
map and the relay map.

Catalog codes ship as plain-text data files (see ``codes/``); their metric
values are pinned by the test suite.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath

import numpy as np

from .constellation import Constellation, make_psk

__all__ = [
    "Trellis",
    "LabelledTrellis",
    "Path",
    "ProductTrellis",
    "encode",
    "bits_to_inputs",
    "inputs_to_bits",
    "unmerged_length",
    "code_unmerged_length",
    "build_product_trellis",
    "catalog",
    "catalog_names",
    "load_trellis_file",
    "enumerate_paths",
]

CATALOG_NAMES = (
    "two_state_8psk",
    "four_state_8psk",
    "eight_state_8psk",
    "sixteen_state_8psk",
    "eight_state_16psk",
    "example1_2state_4psk",
)


class TrellisFormatError(ValueError):
    """Raised for malformed trellis data files."""


@dataclass(frozen=True)
class Trellis:
    """State machine: next_state[s, u] is the successor of state s on input u."""

    n_states: int
    n_inputs: int
    next_state: np.ndarray = field(repr=False)

    def __post_init__(self):
        ns = np.asarray(self.next_state)
        if ns.shape != (self.n_states, self.n_inputs):
            raise ValueError("next_state must have shape (N, K)")
        if ns.min() < 0 or ns.max() >= self.n_states:
            raise ValueError("next_state entries out of range")
        counts = np.bincount(ns.ravel(), minlength=self.n_states)
        if np.any(counts != self.n_inputs):
            raise ValueError("every state must have exactly K incoming edges")

    @property
    def n_edges(self) -> int:
        return self.n_states * self.n_inputs

    @property
    def bits_per_branch(self) -> int:
        return int(np.log2(self.n_inputs))

    def edge_id(self, state: int, u: int) -> int:
        return state * self.n_inputs + u

    def has_parallel_edges(self) -> bool:
        """True when two edges from one state lead to the same successor."""
        for s in range(self.n_states):
            if len(set(self.next_state[s])) < self.n_inputs:
                return True
        return False

    def tail_length(self) -> int:
        """Zero-input branches needed to drive any state back to state 0.

        Requires the zero input to keep state 0 at state 0 so that frames can
        be padded to a common length.
        """
        if self.next_state[0, 0] != 0:
            raise ValueError("zero input must map state 0 to itself")
        worst = 0
        for s in range(self.n_states):
            cur, steps = s, 0
            while cur != 0:
                cur = self.next_state[cur, 0]
                steps += 1
                if steps > self.n_states:
                    raise ValueError(f"zero-input tail from state {s} never reaches 0")
            worst = max(worst, steps)
        return worst

    def reachable_from_zero(self) -> bool:
        seen = {0}
        frontier = deque([0])
        while frontier:
            s = frontier.popleft()
            for t in self.next_state[s]:
                if int(t) not in seen:
                    seen.add(int(t))
                    frontier.append(int(t))
        return len(seen) == self.n_states

    def shortest_inputs_to(self, target: int) -> list[int]:
        """Lexicographically-least shortest zero-origin input sequence reaching target."""
        if target == 0:
            return []
        prev: dict[int, tuple[int, int]] = {}
        frontier = deque([0])
        while frontier:
            s = frontier.popleft()
            for u in range(self.n_inputs):
                t = int(self.next_state[s, u])
                if t != 0 and t not in prev:
                    prev[t] = (s, u)
                    if t == target:
                        frontier.clear()
                        break
                    frontier.append(t)
        if target not in prev:
            raise ValueError(f"state {target} unreachable from state 0")
        seq = []
        cur = target
        while cur != 0:
            s, u = prev[cur]
            seq.append(u)
            cur = s
        return seq[::-1]


@dataclass(frozen=True)
class LabelledTrellis:
    """Trellis plus the three edge labelling maps into a constellation.

    x_s1 / x_s2 / x_r hold constellation indices, shape (N, K), indexed by
    (state, input).
    """

    name: str
    trellis: Trellis
    constellation: Constellation
    x_s1: np.ndarray = field(repr=False)
    x_s2: np.ndarray = field(repr=False)
    x_r: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = (self.trellis.n_states, self.trellis.n_inputs)
        for nm, lab in (("x_s1", self.x_s1), ("x_s2", self.x_s2), ("x_r", self.x_r)):
            if lab.shape != shape:
                raise ValueError(f"{nm} must have shape {shape}")
            if lab.min() < 0 or lab.max() >= self.constellation.M:
                raise ValueError(f"{nm} holds indices outside the constellation")

    def labels(self, which: str) -> np.ndarray:
        try:
            return {"s1": self.x_s1, "s2": self.x_s2, "r": self.x_r}[which]
        except KeyError:
            raise ValueError(f"which must be one of s1/s2/r, got {which!r}") from None

    def label_frequencies(self, which: str) -> np.ndarray:
        return np.bincount(self.labels(which).ravel(), minlength=self.constellation.M)


@dataclass(frozen=True)
class Path:
    """A terminated trellis path: input sequence from state 0 back to state 0."""

    trellis: Trellis
    inputs: np.ndarray = field(repr=False)

    def __post_init__(self):
        states = self._walk()
        if states[-1] != 0:
            raise ValueError("path does not terminate in state 0")
        object.__setattr__(self, "_states", states)

    def _walk(self) -> np.ndarray:
        states = np.zeros(len(self.inputs) + 1, dtype=np.int64)
        cur = 0
        for i, u in enumerate(self.inputs):
            cur = int(self.trellis.next_state[cur, u])
            states[i + 1] = cur
        return states

    @property
    def states(self) -> np.ndarray:
        return self._states

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def edge_ids(self) -> np.ndarray:
        return self.states[:-1] * self.trellis.n_inputs + np.asarray(self.inputs)

    def symbol_indices(self, lt: LabelledTrellis, which: str) -> np.ndarray:
        return lt.labels(which).ravel()[self.edge_ids]

    def symbols(self, lt: LabelledTrellis, which: str) -> np.ndarray:
        return lt.constellation.points[self.symbol_indices(lt, which)]

    def __eq__(self, other) -> bool:
        return isinstance(other, Path) and np.array_equal(self.inputs, other.inputs)

    def __hash__(self):
        return hash(bytes(np.asarray(self.inputs, dtype=np.int64)))


def bits_to_inputs(bits, n_inputs: int) -> np.ndarray:
    """Group bits (MSB first) into K-ary input symbols."""
    bits = np.asarray(bits, dtype=np.int64)
    b = int(np.log2(n_inputs))
    if len(bits) % b != 0:
        raise ValueError(f"bit length {len(bits)} not divisible by log2(K)={b}")
    groups = bits.reshape(-1, b)
    weights = 1 << np.arange(b - 1, -1, -1)
    return groups @ weights


def inputs_to_bits(inputs, n_inputs: int) -> np.ndarray:
    bits_per = int(np.log2(n_inputs))
    inputs = np.asarray(inputs, dtype=np.int64)
    shifts = np.arange(bits_per - 1, -1, -1)
    return ((inputs[:, None] >> shifts) & 1).reshape(-1)


def encode(lt: LabelledTrellis, bits, which: str) -> tuple[Path, np.ndarray]:
    """Encode a payload bit sequence, appending the zero-input tail.

    Returns the terminated path (payload branches plus tail branches) and the
    unit-energy complex symbols under the selected map.
    """
    t = lt.trellis
    payload = bits_to_inputs(bits, t.n_inputs)
    tail = np.zeros(t.tail_length(), dtype=np.int64)
    path = Path(trellis=t, inputs=np.concatenate([payload, tail]))
    return path, path.symbols(lt, which)


def unmerged_length(p1: Path, p2: Path) -> int:
    """Number of branch positions where the two paths use different edges."""
    if len(p1) != len(p2):
        raise ValueError("paths must have equal length")
    return int(np.sum(p1.edge_ids != p2.edge_ids))


def code_unmerged_length(t: Trellis, horizon: int | None = None) -> int:
    """Minimum unmerged length over diverge/remerge path pairs.

    BFS over ordered state pairs; ``horizon`` caps the searched branch count
    (default 2N, enough for the first remerge in any trellis).
    """
    if horizon is None:
        horizon = 2 * t.n_states
    best = None
    # distance[(a, b)] = branches consumed since divergence, states still apart
    dist: dict[tuple[int, int], int] = {}
    frontier: deque[tuple[int, int]] = deque()
    for s in range(t.n_states):
        succ = t.next_state[s]
        for u1 in range(t.n_inputs):
            for u2 in range(u1 + 1, t.n_inputs):
                a, b = int(succ[u1]), int(succ[u2])
                if a == b:
                    best = 1 if best is None else min(best, 1)
                elif (a, b) not in dist:
                    dist[(a, b)] = 1
                    frontier.append((a, b))
    while frontier:
        a, b = frontier.popleft()
        d = dist[(a, b)]
        if best is not None and d + 1 >= best:
            continue
        if d + 1 > horizon:
            continue
        merged = set(t.next_state[a]) & set(t.next_state[b])
        if merged:
            best = d + 1 if best is None else min(best, d + 1)
            continue
        for na in t.next_state[a]:
            for nb in t.next_state[b]:
                key = (int(na), int(nb))
                if key not in dist:
                    dist[key] = d + 1
                    frontier.append(key)
    if best is None:
        raise ValueError("no remerging path pair found within horizon")
    return best


@dataclass(frozen=True)
class ProductTrellis:
    """Joint decoding trellis: states are ordered pairs of base states.

    Product state [a, b] has index a*N + b.  Its K^2 outgoing edges are the
    pairs (e_a, e_b) of base edges in lexicographic (u_a, u_b) order; each
    carries the four-tuple of constellation indices
    (x_s1(e_a), x_s2(e_a), x_s1(e_b), x_r(e_b)).
    """

    base: LabelledTrellis
    n_states: int
    n_edges_per_state: int
    # flat edge arrays, length n_states * n_edges_per_state, ordered by
    # (source product state, u_a, u_b)
    edge_src: np.ndarray = field(repr=False)
    edge_dst: np.ndarray = field(repr=False)
    edge_ua: np.ndarray = field(repr=False)
    edge_ub: np.ndarray = field(repr=False)
    lab_s1a: np.ndarray = field(repr=False)
    lab_s2a: np.ndarray = field(repr=False)
    lab_s1b: np.ndarray = field(repr=False)
    lab_rb: np.ndarray = field(repr=False)

    def four_tuple(self, edge_index: int) -> tuple[int, int, int, int]:
        return (
            int(self.lab_s1a[edge_index]),
            int(self.lab_s2a[edge_index]),
            int(self.lab_s1b[edge_index]),
            int(self.lab_rb[edge_index]),
        )

    def edge_index(self, a: int, b: int, ua: int, ub: int) -> int:
        k = self.base.trellis.n_inputs
        return ((a * self.base.trellis.n_states + b) * k + ua) * k + ub


def build_product_trellis(lt: LabelledTrellis) -> ProductTrellis:
    t = lt.trellis
    n, k = t.n_states, t.n_inputs
    a = np.repeat(np.arange(n), n * k * k)
    b = np.tile(np.repeat(np.arange(n), k * k), n)
    ua = np.tile(np.repeat(np.arange(k), k), n * n)
    ub = np.tile(np.arange(k), n * n * k)
    src = a * n + b
    dst = t.next_state[a, ua] * n + t.next_state[b, ub]
    return ProductTrellis(
        base=lt,
        n_states=n * n,
        n_edges_per_state=k * k,
        edge_src=src,
        edge_dst=dst,
        edge_ua=ua,
        edge_ub=ub,
        lab_s1a=lt.x_s1[a, ua],
        lab_s2a=lt.x_s2[a, ua],
        lab_s1b=lt.x_s1[b, ub],
        lab_rb=lt.x_r[b, ub],
    )


def enumerate_paths(t: Trellis, length: int) -> list[Path]:
    """All terminated paths of the given branch count (exponential; oracles only)."""
    out: list[Path] = []

    def rec(state: int, prefix: list[int]):
        if len(prefix) == length:
            if state == 0:
                out.append(Path(trellis=t, inputs=np.array(prefix, dtype=np.int64)))
            return
        for u in range(t.n_inputs):
            prefix.append(u)
            rec(int(t.next_state[state, u]), prefix)
            prefix.pop()

    rec(0, [])
    return out


def _parse_trellis_text(text: str, name: str) -> LabelledTrellis:
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 3:
                raise TrellisFormatError(f"line {lineno}: header must be 'N K M'")
            header = tuple(int(p) for p in parts)
            continue
        if len(parts) != 6:
            raise TrellisFormatError(
                f"line {lineno}: expected 'from input to xs1 xs2 xr', got {raw!r}"
            )
        rows.append(tuple(int(p) for p in parts))
    if header is None:
        raise TrellisFormatError("missing 'N K M' header")
    n, k, m = header
    if len(rows) != n * k:
        raise TrellisFormatError(f"expected {n * k} edge lines, got {len(rows)}")

    next_state = np.full((n, k), -1, dtype=np.int64)
    xs1 = np.full((n, k), -1, dtype=np.int64)
    xs2 = np.full((n, k), -1, dtype=np.int64)
    xr = np.full((n, k), -1, dtype=np.int64)
    seen_inputs: dict[int, int] = {}
    for frm, u, to, l1, l2, lr in rows:
        if not (0 <= frm < n and 0 <= to < n):
            raise TrellisFormatError(f"state out of range on edge {(frm, u, to)}")
        if not (0 <= u < k):
            raise TrellisFormatError(f"input {u} out of range (K={k})")
        if next_state[frm, u] != -1:
            raise TrellisFormatError(f"duplicate edge (state {frm}, input {u})")
        next_state[frm, u] = to
        xs1[frm, u], xs2[frm, u], xr[frm, u] = l1, l2, lr
        seen_inputs[frm] = seen_inputs.get(frm, 0) + 1
    if np.any(next_state < 0):
        raise TrellisFormatError("missing edges: every (state, input) needs a line")

    trellis = Trellis(n_states=n, n_inputs=k, next_state=next_state)
    lt = LabelledTrellis(
        name=name,
        trellis=trellis,
        constellation=make_psk(m),
        x_s1=xs1,
        x_s2=xs2,
        x_r=xr,
    )
    return lt


def load_trellis_file(path: str | FsPath, name: str | None = None) -> LabelledTrellis:
    path = FsPath(path)
    return _parse_trellis_text(path.read_text(), name or path.stem)


def catalog_names() -> tuple[str, ...]:
    return CATALOG_NAMES


def catalog(name: str) -> LabelledTrellis:
    """Load a built-in code by name (see ``catalog_names()``)."""
    if name not in CATALOG_NAMES:
        raise KeyError(f"unknown catalog code {name!r}; known: {CATALOG_NAMES}")
    text = resources.files("relaytcm.codes").joinpath(f"{name}.txt").read_text()
    return _parse_trellis_text(text, name)
