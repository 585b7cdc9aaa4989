"""Trellis coded modulation for the half-duplex decode-and-forward relay
channel: encoding, near-ML product-trellis decoding, design metrics, pairwise
error probability bounds, capacity bounds and Monte-Carlo BER campaigns."""

from .constellation import (
    Constellation,
    Labelling,
    bar_labelling,
    identity_labelling,
    make_psk,
    squared_distance,
)
from .trellis import (
    LabelledTrellis,
    Path,
    ProductTrellis,
    Trellis,
    build_product_trellis,
    catalog,
    catalog_names,
    code_unmerged_length,
    encode,
    load_trellis_file,
    unmerged_length,
)

__version__ = "0.1.0"
