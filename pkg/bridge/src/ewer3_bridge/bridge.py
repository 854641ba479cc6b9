"""Export encoder representations for a manifest as EWF1/EWL1 files.

For every utterance the speech encoder yields a (frames x dim) matrix of
final-layer hidden states saved as EWF1, and the text encoder yields one
mean-pooled hypothesis vector saved as EWL1 next to it, where the primary
toolkit's loader picks it up as a fixed lexical vector. A sidecar
`metadata.json` records encoder identifiers, layer, and dimensions; a
`skipped.jsonl` records every utterance left out and why.

Two backend families share this interface:

- simulation encoders (`sim-speech-1024`, `sim-text-1024`): deterministic,
  dependency-free stand-ins with the same dimensions and frame rate as the
  large pretrained models; features are fixed seeded projections of frame
  statistics (speech) and hashed word vectors (text), so re-exports are
  byte-identical.
- real encoders (any other identifier): loaded lazily through the optional
  torch + transformers stack; the identifier is resolved as a pretrained
  model name, inference runs deterministically with gradients off.

Writes are atomic (temp file in the target directory, then rename), so a
crash never leaves a half-written feature file behind.
"""

import dataclasses
import json
import os
import sys
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ewer3.corpus import Manifest, load_manifest, save_manifest
from ewer3.errors import DataError
from ewer3.featurize import read_wav, save_features, save_lexical

SPEECH_FRAME_HOP = 320  # samples per output frame at 16 kHz -> 50 Hz


@dataclass(frozen=True)
class EncoderSpec:
    """Documented output geometry of an encoder."""
    dim: int
    frame_rate: Optional[float]  # frames per second of audio; None for text


SPEECH_ENCODERS = {
    "sim-speech-1024": EncoderSpec(dim=1024, frame_rate=16000.0 / SPEECH_FRAME_HOP),
}
TEXT_ENCODERS = {
    "sim-text-1024": EncoderSpec(dim=1024, frame_rate=None),
}


@dataclass(frozen=True)
class BridgeConfig:
    manifest: str
    out_dir: str
    speech_encoder: str = "sim-speech-1024"
    text_encoder: str = "sim-text-1024"
    batch_size: int = 8
    device: str = "cpu"
    layer: int = -1

    def __post_init__(self):
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if not str(self.manifest):
            raise DataError("manifest path must be non-empty")
        if not str(self.out_dir):
            raise DataError("output directory must be non-empty")


def _log(event: str, **fields) -> None:
    parts = [f"event={event}"]
    for key, value in fields.items():
        parts.append(f"{key}={value}")
    print(" ".join(parts), file=sys.stderr, flush=True)


def _encoder_seed(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def _atomic_write(path: Path, writer) -> None:
    """Run `writer(temp_path)` then rename the temp file onto `path`."""
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


# ------------------------------------------------------- simulated backends

def _sim_frame_stats(samples: np.ndarray) -> np.ndarray:
    """Per-frame summary statistics over fixed 320-sample hops."""
    n_frames = max(1, len(samples) // SPEECH_FRAME_HOP)
    frames = []
    for t in range(n_frames):
        chunk = samples[t * SPEECH_FRAME_HOP:(t + 1) * SPEECH_FRAME_HOP]
        if len(chunk) == 0:
            chunk = np.zeros(1)
        diffs = np.signbit(chunk[1:]) != np.signbit(chunk[:-1])
        zcr = float(np.mean(diffs)) if len(chunk) > 1 else 0.0
        energy = float(np.mean(chunk * chunk))
        frames.append([
            float(np.mean(chunk)), float(np.std(chunk)),
            float(np.sqrt(energy)), float(np.min(chunk)),
            float(np.max(chunk)), float(np.mean(np.abs(chunk))),
            zcr, float(np.log1p(energy)),
        ])
    return np.asarray(frames, dtype=np.float64)


def _sim_speech_matrix(samples: np.ndarray, encoder: str, dim: int) -> np.ndarray:
    stats = _sim_frame_stats(samples)
    rng = np.random.default_rng(_encoder_seed(encoder))
    projection = rng.normal(0.0, 1.0, size=(stats.shape[1], dim))
    return np.tanh(stats @ projection)


def _sim_text_vector(hypothesis: str, encoder: str, dim: int) -> np.ndarray:
    words = hypothesis.split()
    if not words:
        return np.zeros(dim)
    base = _encoder_seed(encoder)
    vectors = []
    for word in words:
        seed = (base, zlib.crc32(word.encode("utf-8")))
        vectors.append(np.random.default_rng(seed).normal(0.0, 1.0, size=dim))
    return np.mean(vectors, axis=0)


# ------------------------------------------------------------ real backends

def _load_real_speech(name: str, device: str):
    try:
        import torch
        from transformers import AutoFeatureExtractor, AutoModel
    except ImportError as exc:
        raise DataError(
            f"speech encoder {name!r} needs the optional real-model stack "
            f"(install the 'real' extra): {exc}") from None
    try:
        extractor = AutoFeatureExtractor.from_pretrained(name)
        model = AutoModel.from_pretrained(name).to(device).eval()
    except Exception as exc:
        raise DataError(f"cannot load speech encoder {name!r}: {exc}") from None
    return torch, extractor, model


def _load_real_text(name: str, device: str):
    try:
        import torch
        from transformers import AutoModel, AutoTokenizer
    except ImportError as exc:
        raise DataError(
            f"text encoder {name!r} needs the optional real-model stack "
            f"(install the 'real' extra): {exc}") from None
    try:
        tokenizer = AutoTokenizer.from_pretrained(name)
        model = AutoModel.from_pretrained(name).to(device).eval()
    except Exception as exc:
        raise DataError(f"cannot load text encoder {name!r}: {exc}") from None
    return torch, tokenizer, model


def _real_speech_batch(stack, clips, layer: int):
    torch, extractor, model = stack
    inputs = extractor([c.samples for c in clips], sampling_rate=16000,
                       return_tensors="pt", padding=True)
    inputs = {k: v.to(model.device) for k, v in inputs.items()}
    with torch.no_grad():
        out = model(**inputs, output_hidden_states=True)
    hidden = out.hidden_states[layer]
    matrices = []
    for i, clip in enumerate(clips):
        n_frames = int(len(clip.samples) // SPEECH_FRAME_HOP)
        matrices.append(hidden[i, :max(1, n_frames)].cpu().numpy())
    return matrices


def _real_text_batch(stack, texts, layer: int):
    torch, tokenizer, model = stack
    inputs = tokenizer(texts, return_tensors="pt", padding=True,
                       truncation=True)
    inputs = {k: v.to(model.device) for k, v in inputs.items()}
    with torch.no_grad():
        out = model(**inputs, output_hidden_states=True)
    hidden = out.hidden_states[layer]
    mask = inputs["attention_mask"].unsqueeze(-1)
    summed = (hidden * mask).sum(dim=1)
    counts = mask.sum(dim=1).clamp(min=1)
    return (summed / counts).cpu().numpy()


# ------------------------------------------------------------------ export

def export_features(cfg: BridgeConfig) -> Manifest:
    """Write EWF1/EWL1 pairs plus metadata for every exportable utterance.

    Returns (and writes to out_dir/manifest.jsonl) a manifest whose feat
    fields point at the exported files. Utterances whose audio cannot be
    read are skipped, logged to standard error, and listed in
    out_dir/skipped.jsonl; they never appear in the output manifest.
    """
    manifest = load_manifest(cfg.manifest)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    simulated_speech = cfg.speech_encoder in SPEECH_ENCODERS
    simulated_text = cfg.text_encoder in TEXT_ENCODERS
    speech_stack = None if simulated_speech else _load_real_speech(
        cfg.speech_encoder, cfg.device)
    text_stack = None if simulated_text else _load_real_text(
        cfg.text_encoder, cfg.device)
    if simulated_speech:
        speech_dim = SPEECH_ENCODERS[cfg.speech_encoder].dim
    else:
        speech_dim = int(speech_stack[2].config.hidden_size)
    if simulated_text:
        text_dim = TEXT_ENCODERS[cfg.text_encoder].dim
    else:
        text_dim = int(text_stack[2].config.hidden_size)

    _log("config", manifest=cfg.manifest, out=cfg.out_dir,
         speech_encoder=cfg.speech_encoder, text_encoder=cfg.text_encoder,
         batch_size=cfg.batch_size, device=cfg.device, layer=cfg.layer,
         speech_dim=speech_dim, text_dim=text_dim)

    kept = []
    skipped = []
    pending = []  # (utterance, clip) waiting for a real-model batch

    def flush_pending():
        if not pending:
            return
        clips = [clip for _, clip in pending]
        texts = [utt.hyp for utt, _ in pending]
        if simulated_speech:
            matrices = [_sim_speech_matrix(c.samples, cfg.speech_encoder,
                                           speech_dim) for c in clips]
        else:
            matrices = _real_speech_batch(speech_stack, clips, cfg.layer)
        if simulated_text:
            vectors = [_sim_text_vector(t, cfg.text_encoder, text_dim)
                       for t in texts]
        else:
            vectors = _real_text_batch(text_stack, texts, cfg.layer)
        for (utt, _), matrix, vector in zip(pending, matrices, vectors):
            feat_path = out / f"{utt.id}.ewf1"
            lex_path = out / f"{utt.id}.ewl1"
            _atomic_write(feat_path, lambda p, m=matrix: save_features(p, m))
            _atomic_write(lex_path, lambda p, v=vector: save_lexical(p, v))
            kept.append(dataclasses.replace(utt, wav=None,
                                            feat=str(feat_path)))
        pending.clear()

    for utt in manifest:
        if utt.wav is None:
            skipped.append({"id": utt.id, "reason": "no wav source"})
            _log("skip", id=utt.id, reason="no-wav-source")
            continue
        try:
            clip = read_wav(utt.wav)
        except (DataError, OSError) as exc:
            skipped.append({"id": utt.id, "reason": str(exc)})
            _log("skip", id=utt.id, reason="audio-unreadable")
            continue
        pending.append((utt, clip))
        if len(pending) >= cfg.batch_size:
            flush_pending()
    flush_pending()

    metadata = {
        "speech_encoder": cfg.speech_encoder,
        "text_encoder": cfg.text_encoder,
        "layer": cfg.layer,
        "speech_dim": speech_dim,
        "text_dim": text_dim,
        "frame_rate_hz": 16000.0 / SPEECH_FRAME_HOP,
    }
    _atomic_write(out / "metadata.json", lambda p: p.write_text(
        json.dumps(metadata, sort_keys=True, indent=2) + "\n",
        encoding="utf-8"))
    _atomic_write(out / "skipped.jsonl", lambda p: p.write_text(
        "".join(json.dumps(row) + "\n" for row in skipped),
        encoding="utf-8"))

    bridged = Manifest(tuple(kept))
    save_manifest(bridged, out / "manifest.jsonl")
    _log("done", n_exported=len(bridged), n_skipped=len(skipped))
    return bridged
