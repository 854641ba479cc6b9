"""Label-distribution shaping: zero-WER downsampling and binned dev splits.

WER labels are grouped at integer-percent granularity (round half up of
wer*100). Both operations are deterministic in their seed, never upsample,
and preserve the original relative order of kept utterances.
"""

from typing import Tuple

import numpy as np

from .corpus import Manifest
from .errors import DataError


def _require_labels(manifest: Manifest) -> None:
    for utt in manifest:
        if utt.wer is None:
            raise DataError(f"utterance {utt.id!r} has no wer label")


def score_group(wer: float) -> int:
    """Integer WER percent, round half up."""
    return int(np.floor(wer * 100.0 + 0.5))


def downsample_zero(manifest: Manifest, seed: int) -> Manifest:
    """Per language, thin the zero-WER group down to the combined size of the
    next two most frequent score groups.

    Applies only when the zero group is the most frequent for that language
    (ties broken toward the lower WER key) and strictly larger than that
    combined size; otherwise the language passes through unchanged. Kept
    zero-WER utterances are a uniform seeded sample; order is preserved.
    """
    _require_labels(manifest)
    rng = np.random.default_rng(seed)
    drop = set()
    languages = []
    for utt in manifest:
        if utt.lang not in languages:
            languages.append(utt.lang)
    for lang in languages:
        indices = [i for i, utt in enumerate(manifest) if utt.lang == lang]
        counts = {}
        for i in indices:
            key = score_group(manifest[i].wer)
            counts[key] = counts.get(key, 0) + 1
        # most frequent first; ties go to the lower WER key
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if not ranked or ranked[0][0] != 0 or len(ranked) < 2:
            continue
        n = sum(count for _, count in ranked[1:3])
        zero_indices = [i for i in indices if score_group(manifest[i].wer) == 0]
        if len(zero_indices) <= n:
            continue
        keep = rng.choice(len(zero_indices), size=n, replace=False)
        keep_set = {zero_indices[j] for j in keep}
        drop.update(i for i in zero_indices if i not in keep_set)
    return Manifest(tuple(utt for i, utt in enumerate(manifest) if i not in drop))


def wer_bin(wer: float, n_bins: int = 10) -> int:
    """Equal-width bin index over [0,1] in percent terms; the last bin is closed."""
    return min(int(np.floor(wer * 100.0 / (100.0 / n_bins))), n_bins - 1)


def binned_dev_split(manifest: Manifest, seed: int, n_bins: int = 10,
                     frac: float = 0.1) -> Tuple[Manifest, Manifest]:
    """Split into (train, dev) by sampling round(frac * bin_size) utterances
    from each WER bin into dev. Round is half up; both outputs keep the
    original relative order; together they partition the input exactly.
    """
    _require_labels(manifest)
    if not 0.0 <= frac <= 1.0:
        raise DataError("frac must be in [0, 1]")
    rng = np.random.default_rng(seed)
    dev_indices = set()
    for b in range(n_bins):
        members = [i for i, utt in enumerate(manifest) if wer_bin(utt.wer, n_bins) == b]
        take = int(np.floor(frac * len(members) + 0.5))
        if take == 0 or not members:
            continue
        chosen = rng.choice(len(members), size=take, replace=False)
        dev_indices.update(members[j] for j in chosen)
    train = tuple(utt for i, utt in enumerate(manifest) if i not in dev_indices)
    dev = tuple(utt for i, utt in enumerate(manifest) if i in dev_indices)
    return Manifest(train), Manifest(dev)
