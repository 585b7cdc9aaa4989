"""Two-phase Rayleigh-fading relay channel.

Phase 1: the source transmits; the relay hears through h_sr and the
destination through h_sd1.  Phase 2: source and relay transmit together; the
destination hears the superposition through h_sd2 and h_rd.  All noise is
CN(0,1); the SNR is swept through the symbol-energy scale alone.

Fades and noise are drawn from counter-based Philox streams keyed by
(seed, trial, link), so trials are reproducible and independent of worker
scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChannelParams",
    "ChannelRealization",
    "link_stream",
    "draw_realization",
    "phase1",
    "phase2",
    "interleave",
    "deinterleave",
    "es_scale",
]

# link identifiers for RNG substreams
_LINKS = {"h_sr": 0, "h_sd1": 1, "h_sd2": 2, "h_rd": 3,
          "z_r": 4, "z_d1": 5, "z_d2": 6, "payload": 7}


@dataclass(frozen=True)
class ChannelParams:
    """Fade variances (linear) and the symbol energy in dB."""

    sigma2_sd: float
    sigma2_sr: float
    sigma2_rd: float
    es_db: float = 0.0
    fading_mode: str = "iid"       # "iid" or "block"
    block_depth: int = 1

    def __post_init__(self):
        if min(self.sigma2_sd, self.sigma2_sr, self.sigma2_rd) <= 0:
            raise ValueError("fade variances must be positive")
        if self.fading_mode not in ("iid", "block"):
            raise ValueError(f"unknown fading mode {self.fading_mode!r}")
        if self.fading_mode == "block" and self.block_depth < 1:
            raise ValueError("block_depth must be >= 1")

    @classmethod
    def from_db(cls, sd_db: float, sr_db: float, rd_db: float, es_db: float = 0.0,
                **kw) -> "ChannelParams":
        return cls(
            sigma2_sd=10 ** (sd_db / 10),
            sigma2_sr=10 ** (sr_db / 10),
            sigma2_rd=10 ** (rd_db / 10),
            es_db=es_db,
            **kw,
        )

    @property
    def gamma(self) -> float:
        return self.sigma2_sd / self.sigma2_rd

    @property
    def es_linear(self) -> float:
        return 10 ** (self.es_db / 10)


@dataclass(frozen=True)
class ChannelRealization:
    """Per-symbol fades and noise for one frame (or a batch of frames).

    Arrays share a common shape, either (L,) or (batch, L).
    """

    h_sr: np.ndarray = field(repr=False)
    h_sd1: np.ndarray = field(repr=False)
    h_sd2: np.ndarray = field(repr=False)
    h_rd: np.ndarray = field(repr=False)
    z_r: np.ndarray = field(repr=False)
    z_d1: np.ndarray = field(repr=False)
    z_d2: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = self.h_sr.shape
        for name in ("h_sd1", "h_sd2", "h_rd", "z_r", "z_d1", "z_d2"):
            if getattr(self, name).shape != shape:
                raise ValueError("all realization arrays must share one shape")

    @property
    def length(self) -> int:
        return self.h_sr.shape[-1]


def link_stream(seed: int, trial: int, link: str | int) -> np.random.Generator:
    """Counter-based substream keyed by (seed, trial, link)."""
    link_id = _LINKS[link] if isinstance(link, str) else int(link)
    bg = np.random.Philox(key=np.uint64(seed), counter=[0, 0, trial, link_id])
    return np.random.Generator(bg)


def _cn(rng: np.random.Generator, variance: float, shape) -> np.ndarray:
    scale = np.sqrt(variance / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _block_spread(h: np.ndarray, depth: int) -> np.ndarray:
    """Fades constant over blocks of `depth`, then spread by the interleaver."""
    L = h.shape[-1]
    n_blocks = -(-L // depth)
    blocks = h[..., :n_blocks]
    rep = np.repeat(blocks, depth, axis=-1)[..., :L]
    return interleave(rep, depth) if L % depth == 0 else rep


def draw_realization(
    params: ChannelParams,
    L: int,
    seed: int = 0,
    trial: int = 0,
    batch: int | None = None,
    noise_scale: float = 1.0,
) -> ChannelRealization:
    """Draw fades and CN(0,1) noise for one frame or a batch of frames.

    In iid mode every symbol sees an independent fade; in block mode fades are
    constant over blocks of `block_depth` and then spread by the block
    interleaver.  ``noise_scale`` is a test hook (0 disables noise).
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    shape = (L,) if batch is None else (batch, L)

    def fade(link, var):
        rng = link_stream(seed, trial, link)
        h = _cn(rng, var, shape)
        if params.fading_mode == "block":
            h = _block_spread(h, params.block_depth)
        return h

    def noise(link):
        rng = link_stream(seed, trial, link)
        return noise_scale * _cn(rng, 1.0, shape)

    return ChannelRealization(
        h_sr=fade("h_sr", params.sigma2_sr),
        h_sd1=fade("h_sd1", params.sigma2_sd),
        h_sd2=fade("h_sd2", params.sigma2_sd),
        h_rd=fade("h_rd", params.sigma2_rd),
        z_r=noise("z_r"),
        z_d1=noise("z_d1"),
        z_d2=noise("z_d2"),
    )


def es_scale(params: ChannelParams) -> float:
    """Amplitude applied to unit-energy constellation points."""
    return float(np.sqrt(params.es_linear))


def phase1(symbols_s1: np.ndarray, real: ChannelRealization):
    """Relay and destination observations of the Phase-1 transmission.

    ``symbols_s1`` must already carry the energy scale.
    """
    if symbols_s1.shape != real.h_sr.shape:
        raise ValueError("symbol/realization length mismatch")
    y_r = real.h_sr * symbols_s1 + real.z_r
    y_d1 = real.h_sd1 * symbols_s1 + real.z_d1
    return y_r, y_d1


def phase2(symbols_s2: np.ndarray, symbols_r: np.ndarray, real: ChannelRealization):
    """Destination observation of the superposed Phase-2 transmission."""
    if symbols_s2.shape != real.h_sd2.shape or symbols_r.shape != real.h_rd.shape:
        raise ValueError("symbol/realization length mismatch")
    return real.h_sd2 * symbols_s2 + real.h_rd * symbols_r + real.z_d2


def interleave(seq: np.ndarray, depth: int) -> np.ndarray:
    """Row-in/column-out block interleaver over the last axis.

    The sequence fills a (L/depth) x depth matrix row by row and is read out
    column by column; element i lands at position
    (i mod depth) * (L/depth) + (i div depth).
    """
    seq = np.asarray(seq)
    L = seq.shape[-1]
    if depth < 1 or L % depth != 0:
        raise ValueError(f"depth {depth} must divide the length {L}")
    rows = L // depth
    shaped = seq.reshape(*seq.shape[:-1], rows, depth)
    return np.swapaxes(shaped, -1, -2).reshape(*seq.shape[:-1], L)


def deinterleave(seq: np.ndarray, depth: int) -> np.ndarray:
    """Exact inverse of :func:`interleave`."""
    seq = np.asarray(seq)
    L = seq.shape[-1]
    if depth < 1 or L % depth != 0:
        raise ValueError(f"depth {depth} must divide the length {L}")
    rows = L // depth
    shaped = seq.reshape(*seq.shape[:-1], depth, rows)
    return np.swapaxes(shaped, -1, -2).reshape(*seq.shape[:-1], L)
