"""Chirp-spread-spectrum frame synchronisation: waveform, channel, receiver and Monte Carlo harness."""

from .channel import Impairments, transmit
from .receiver import FrameShape, ReceiverConfig, ReceiverOutput, run_receiver
from .sync import OffsetEstimate
from .waveform import FrameConfig, IqSignal, LoraParams

__all__ = [
    "FrameConfig",
    "FrameShape",
    "Impairments",
    "IqSignal",
    "LoraParams",
    "OffsetEstimate",
    "ReceiverConfig",
    "ReceiverOutput",
    "run_receiver",
    "transmit",
]

__version__ = "0.1.0"
