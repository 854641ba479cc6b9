"""Feature-extraction bridge: export encoder representations to EWF1/EWL1.

Runs a speech encoder over each utterance's audio and a text encoder over
its hypothesis, writing the frame-level hidden states and the mean-pooled
sentence vector in the ewer3 toolkit's binary feature formats. The default
backends are deterministic simulations with the same interface and
dimensions as the large pretrained encoders they stand in for; pass real
encoder identifiers (and install the `real` extra) to export from actual
models.
"""

from .bridge import BridgeConfig, EncoderSpec, SPEECH_ENCODERS, TEXT_ENCODERS, export_features

__all__ = [
    "BridgeConfig",
    "EncoderSpec",
    "SPEECH_ENCODERS",
    "TEXT_ENCODERS",
    "export_features",
]
