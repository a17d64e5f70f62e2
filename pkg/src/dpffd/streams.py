"""Named, reproducible random streams derived from one master seed.

Every consumer asks for a stream by name. Two requests for the same name under
the same master seed yield generators in the same initial state, which is how
detector nodes keep their particle sets synchronized without communicating.
"""
import zlib

import numpy as np

PROPOSAL = "proposal"
BINARY = "binary"
RESAMPLE = "resample"
PLANT = "plant"


def measurement_stream_name(node_id):
    return f"measure-{node_id}"


class RandomStreams:
    def __init__(self, master_seed):
        master_seed = int(master_seed)
        if not 0 <= master_seed < 2**64:
            raise ValueError(f"master seed must fit in an unsigned 64-bit integer, got {master_seed}")
        self.master_seed = master_seed

    def stream(self, name):
        """Fresh generator for ``name``; independent of every other name."""
        key = zlib.crc32(name.encode("utf-8"))
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(key,))
        return np.random.Generator(np.random.PCG64(seq))

    def __repr__(self):
        return f"RandomStreams({self.master_seed})"
