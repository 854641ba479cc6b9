"""Corpus data model: utterances, JSONL manifests, exact WER labeling, filtering.

A manifest is UTF-8 text with one JSON object per line. Fields: `id`, `lang`,
exactly one of `wav`/`feat` (path), `dur` (seconds), `hyp`, optional `ref`,
optional `wer` in [0,1]. Unknown fields are rejected. Line order is
authoritative and preserved by every operation here.
"""

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

from .errors import ManifestError

_FIELDS = {"id", "lang", "wav", "feat", "dur", "hyp", "ref", "wer"}


@dataclass(frozen=True)
class Utterance:
    """One (audio, hypothesis) record with optional reference and WER label."""

    id: str
    lang: str
    dur: float
    hyp: str
    wav: Optional[str] = None
    feat: Optional[str] = None
    ref: Optional[str] = None
    wer: Optional[float] = None

    def __post_init__(self):
        if (self.wav is None) == (self.feat is None):
            raise ManifestError(
                f"utterance {self.id!r}: exactly one of wav/feat must be set"
            )
        if not self.dur > 0:
            raise ManifestError(f"utterance {self.id!r}: dur must be > 0, got {self.dur}")
        if self.wer is not None and not 0.0 <= self.wer <= 1.0:
            raise ManifestError(
                f"utterance {self.id!r}: wer must be in [0,1], got {self.wer}"
            )

    @property
    def audio_source(self) -> str:
        return self.wav if self.wav is not None else self.feat


@dataclass(frozen=True)
class Manifest:
    utterances: tuple

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        seen = set()
        for utt in self.utterances:
            if utt.id in seen:
                raise ManifestError(f"duplicate utterance id {utt.id!r}")
            seen.add(utt.id)

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def __getitem__(self, i):
        return self.utterances[i]


def tokenize(text: str) -> list:
    """Whitespace tokenization after trimming; no normalization of any kind."""
    return text.split()


def compute_wer(reference: str, hypothesis: str) -> float:
    """Word error rate: minimal edit distance over reference length, clamped to [0,1].

    Texts split on whitespace, no other normalization. Unit substitution,
    deletion, and insertion costs. Empty reference yields 0.0 against an
    empty hypothesis and 1.0 (clamped infinite ratio) otherwise.
    """
    ref = tokenize(reference)
    hyp = tokenize(hypothesis)
    if len(ref) == 0:
        return 0.0 if len(hyp) == 0 else 1.0
    # two-row Levenshtein over words
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, start=1):
            if r == h:
                cur[j] = prev[j - 1]
            else:
                cur[j] = 1 + min(prev[j - 1], prev[j], cur[j - 1])
        prev = cur
    return min(1.0, prev[-1] / len(ref))


def _parse_record(obj: dict, lineno: int) -> Utterance:
    if not isinstance(obj, dict):
        raise ManifestError(f"line {lineno}: record is not a JSON object")
    unknown = set(obj) - _FIELDS
    if unknown:
        raise ManifestError(f"line {lineno}: unknown field(s) {sorted(unknown)}")
    for key in ("id", "lang", "dur", "hyp"):
        if key not in obj:
            raise ManifestError(f"line {lineno}: missing required field {key!r}")
    for key in ("id", "lang", "hyp"):
        if not isinstance(obj[key], str):
            raise ManifestError(f"line {lineno}: field {key!r} must be a string")
    for key in ("ref",):
        if key in obj and not isinstance(obj[key], str):
            raise ManifestError(f"line {lineno}: field {key!r} must be a string")
    for key in ("dur", "wer"):
        if key in obj and not isinstance(obj[key], (int, float)):
            raise ManifestError(f"line {lineno}: field {key!r} must be a number")
    for key in ("wav", "feat"):
        if key in obj and not isinstance(obj[key], str):
            raise ManifestError(f"line {lineno}: field {key!r} must be a path string")
    try:
        return Utterance(
            id=obj["id"],
            lang=obj["lang"],
            dur=float(obj["dur"]),
            hyp=obj["hyp"],
            wav=obj.get("wav"),
            feat=obj.get("feat"),
            ref=obj.get("ref"),
            wer=float(obj["wer"]) if "wer" in obj else None,
        )
    except ManifestError as exc:
        raise ManifestError(f"line {lineno}: {exc}") from None


def load_manifest(path) -> Manifest:
    """Load and validate a JSONL manifest; errors carry the offending line number."""
    utterances = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            utt = _parse_record(obj, lineno)
            if utt.id in seen:
                raise ManifestError(f"line {lineno}: duplicate utterance id {utt.id!r}")
            seen.add(utt.id)
            utterances.append(utt)
    return Manifest(tuple(utterances))


def save_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt in manifest:
            obj = {"id": utt.id, "lang": utt.lang}
            if utt.wav is not None:
                obj["wav"] = utt.wav
            else:
                obj["feat"] = utt.feat
            obj["dur"] = utt.dur
            obj["hyp"] = utt.hyp
            if utt.ref is not None:
                obj["ref"] = utt.ref
            if utt.wer is not None:
                obj["wer"] = utt.wer
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def label_corpus(manifest: Manifest) -> Manifest:
    """Set every wer field from the exact WER of (ref, hyp) word sequences."""
    labeled = []
    for utt in manifest:
        if utt.ref is None:
            raise ManifestError(f"utterance {utt.id!r} has no reference to label from")
        wer = compute_wer(utt.ref, utt.hyp)
        labeled.append(dataclasses.replace(utt, wer=wer))
    return Manifest(tuple(labeled))


def filter_duration(manifest: Manifest, max_seconds: float = 10.0) -> Manifest:
    """Keep utterances with duration <= max_seconds (inclusive), order preserved."""
    return Manifest(tuple(u for u in manifest if u.dur <= max_seconds))
