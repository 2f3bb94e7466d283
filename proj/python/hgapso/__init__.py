"""Two-level DenseNet-style architecture and connection search.

The heavy lifting happens in the native ``_core`` module; this layer turns
its JSON payloads into plain Python objects.
"""

import json

from ._core import (
    CheckpointError,
    Config,
    ConfigError,
    Error,
    EvaluationError,
    InvalidArgument,
    ProtocolError,
    arch_dimension,
    conn_segment_length,
    conv_input_channels,
    decode_position,
    export_genome,
    param_count,
    probe_lr,
    surrogate_fitness,
)
from ._core import Search as _Search
from ._core import _run_search

__all__ = [
    "CheckpointError",
    "Config",
    "ConfigError",
    "Error",
    "EvaluationError",
    "InvalidArgument",
    "ProtocolError",
    "Search",
    "arch_dimension",
    "conn_segment_length",
    "conv_input_channels",
    "decode_position",
    "export_genome",
    "genome",
    "param_count",
    "probe_lr",
    "run_search",
    "surrogate_fitness",
]


def genome(blocks, conn_bits=None):
    """Genome text for ``blocks`` = [(layers, growth), ...].

    Without ``conn_bits`` every skip connection is switched on.
    """
    if conn_bits is None:
        conn_bits = "".join("1" * conn_segment_length(layers) for layers, _ in blocks)
    return json.dumps({"blocks": [list(b) for b in blocks], "conn_bits": conn_bits}, separators=(",", ":"))


def run_search(config):
    """Runs a full search and returns the result as a dict."""
    return json.loads(_run_search(config))


class Search:
    """Step-wise search with checkpoint support."""

    def __init__(self, config):
        self._impl = _Search(config)

    @classmethod
    def resume(cls, data):
        """Continues from checkpoint bytes."""
        obj = cls.__new__(cls)
        obj._impl = _Search.resume(data)
        return obj

    @property
    def done(self):
        return self._impl.done

    @property
    def generation(self):
        return self._impl.generation

    def step(self):
        """Runs one outer generation and returns its history record."""
        return json.loads(self._impl._step())["history"][0]

    def run(self):
        self._impl.run()

    def result(self):
        return json.loads(self._impl._result())

    def checkpoint(self):
        return self._impl.checkpoint()
