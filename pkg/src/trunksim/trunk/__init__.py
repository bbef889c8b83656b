"""TCP trunk endpoints: buffer policy, header codec, transmitter and receiver."""

from .codec import (CompressionContext, Deframer, FramingError, HeaderCompressor,
                    HeaderDecompressor, compress_header, decompress_header, deframe, frame)
from .policy import (TrunkClass, TrunkConfig, classify, drop_probability, drop_threshold,
                     exemption_threshold, flow_window_estimate, trunk_buffer_capacity)
from .receiver import TrunkReceiver, trunk_receive
from .transmitter import (TRUNK_MSS, AdmitVerdict, FlowAccount, TrunkTransmitter,
                          active_flow_count, admit, pump)

__all__ = [
    "AdmitVerdict", "CompressionContext", "Deframer", "FlowAccount", "FramingError",
    "HeaderCompressor", "HeaderDecompressor", "TRUNK_MSS", "TrunkClass", "TrunkConfig",
    "TrunkReceiver", "TrunkTransmitter", "active_flow_count", "admit", "classify",
    "compress_header", "decompress_header", "deframe", "drop_probability", "drop_threshold",
    "exemption_threshold", "flow_window_estimate", "frame", "pump", "trunk_buffer_capacity",
    "trunk_receive",
]
