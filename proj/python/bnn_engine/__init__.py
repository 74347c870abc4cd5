"""Python bindings for the packed binary neural network inference engine."""

import json

from ._core import (
    BitTensor,
    BnnError,
    DimensionError,
    FormatError,
    GraphError,
    InvalidParameterError,
    InvalidValueError,
    IoError,
    Model,
    PrunableChannelError,
    binary_dot,
    pack_channels,
    plane_dot,
    read_float_tensor,
    read_image,
    split_bitplanes,
    unpack_channels,
    write_image,
)

__all__ = [
    "BitTensor",
    "BnnError",
    "DimensionError",
    "FormatError",
    "GraphError",
    "InvalidParameterError",
    "InvalidValueError",
    "IoError",
    "Model",
    "PrunableChannelError",
    "bench",
    "binary_dot",
    "pack_channels",
    "plane_dot",
    "read_float_tensor",
    "read_image",
    "split_bitplanes",
    "unpack_channels",
    "write_image",
]


def bench(model, repeats=5, threads=1, oracle_check=True):
    """Per-layer timing report as a dict (same schema as `bnn bench --json`)."""
    return json.loads(model.bench_json(repeats, threads, oracle_check))
