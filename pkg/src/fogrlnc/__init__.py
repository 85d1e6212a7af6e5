"""Random linear network coding for vehicular data offloading.

Modules:

* :mod:`fogrlnc.gf` - GF(2^m) arithmetic
* :mod:`fogrlnc.rlnc` - generation-based encoder/decoder and recovery probabilities
* :mod:`fogrlnc.wire` - RLNC-CAM frame codec
* :mod:`fogrlnc.facility` - sensor stream to RLNC-CAM schedule
* :mod:`fogrlnc.channel` - PER models for CAV to RSU links
* :mod:`fogrlnc.fogsim` - fog orchestrator simulator and Monte Carlo sweeps
"""

from .gf import FieldSpec
from .rlnc import (
    CodedPacket,
    Decoder,
    Generation,
    coding_vector_from_seed,
    delivery_curve,
    encode,
    recovery_probability,
    segment,
)

__version__ = "0.1.0"

__all__ = [
    "CodedPacket",
    "Decoder",
    "FieldSpec",
    "Generation",
    "coding_vector_from_seed",
    "delivery_curve",
    "encode",
    "recovery_probability",
    "segment",
]
