"""Synthetic corpus generator.

Each vocabulary word is a fixed-frequency tone. An utterance models one pass
through a noisy channel: the reference text is corrupted word by word into
the hypothesis a recognizer would emit, and the audio renders the hypothesis
words back to back at 16 kHz under the channel noise that caused those
errors; the noisier the channel, the higher the realized WER. The stored
label is always the alignment oracle on (ref, hyp), never the number of edits
applied, which can overshoot the minimal alignment cost.

Corrupted words are drawn from the same inventory the references use, and the
rendered tones always match the hypothesis text, so neither the text alone
nor a tone-vs-text comparison reveals the label; the evidence lives in the
noise level. That evidence is deliberately blurred twice: every utterance
gets a random label-independent noise floor, and the WER-dependent noise term
is scaled by a random per-utterance gain. A regressor therefore cannot invert
the noise level exactly and has to lean on the label prior it was trained
under, which is what makes training-set skew visible downstream.

Most utterances are clean (WER 0) by default, and corruption rates for the
rest are skewed toward light damage (rate_power > 1 bends the uniform rate
draw downward), giving the heavily zero- and low-WER-skewed label
distribution the sampling stage exists to correct.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Manifest, Utterance, compute_wer
from .errors import DataError
from .featurize import TARGET_RATE, write_wav

TONE_SECONDS = 0.25


@dataclass(frozen=True)
class SimConfig:
    seed: int
    n_utterances: int = 1000
    vocab_size: int = 64
    min_words: int = 4
    max_words: int = 24
    p_clean: float = 0.65
    rate_low: float = 0.05
    rate_high: float = 0.9
    rate_power: float = 2.5
    p_sub: float = 0.6
    p_del: float = 0.2
    p_ins: float = 0.2
    noise_scale: float = 0.4
    noise_base: float = 0.08
    gain_low: float = 0.3
    gain_high: float = 1.7
    lang: str = "sim"

    def __post_init__(self):
        if self.n_utterances < 1:
            raise DataError("n_utterances must be >= 1")
        if self.vocab_size < 4:
            raise DataError("vocab_size must be >= 4")
        if not 1 <= self.min_words <= self.max_words:
            raise DataError("need 1 <= min_words <= max_words")
        if not 0.0 <= self.p_clean <= 1.0:
            raise DataError("p_clean must be in [0, 1]")
        if not 0.0 <= self.rate_low <= self.rate_high <= 1.0:
            raise DataError("need 0 <= rate_low <= rate_high <= 1")
        if self.rate_power <= 0:
            raise DataError("rate_power must be > 0")
        splits = self.p_sub + self.p_del + self.p_ins
        if min(self.p_sub, self.p_del, self.p_ins) < 0 or abs(splits - 1.0) > 1e-9:
            raise DataError("edit splits must be non-negative and sum to 1")
        if self.noise_scale < 0:
            raise DataError("noise_scale must be >= 0")
        if self.noise_base < 0:
            raise DataError("noise_base must be >= 0")
        if not 0.0 <= self.gain_low <= self.gain_high:
            raise DataError("need 0 <= gain_low <= gain_high")


def word_name(index: int) -> str:
    return f"w{index:03d}"


def word_frequency(index: int) -> float:
    """Distinct tone fundamental per vocabulary word, well below Nyquist."""
    return 200.0 + 55.0 * index


def corrupt(ref_words, rate, splits, inventory, rng):
    """Noisy-channel edit pass over the reference words.

    Per word, with probability `rate` apply one edit drawn from `splits`
    (substitute with a different inventory word / delete / emit the word and
    insert a random extra one).
    """
    if not 0.0 <= rate <= 1.0:
        raise DataError("rate must be in [0, 1]")
    p_sub, p_del, p_ins = splits
    hyp = []
    for word in ref_words:
        if rng.uniform() >= rate:
            hyp.append(word)
            continue
        u = rng.uniform()
        if u < p_sub:
            replacement = word
            while replacement == word:
                replacement = inventory[rng.integers(len(inventory))]
            hyp.append(replacement)
        elif u < p_sub + p_del:
            pass
        else:
            hyp.append(word)
            hyp.append(inventory[rng.integers(len(inventory))])
    return hyp


def render_audio(word_indices, wer, cfg: SimConfig, rng) -> np.ndarray:
    """Back-to-back word tones plus white noise.

    Noise amplitude grows with the WER label (noise_scale * wer * gain) on top
    of a per-utterance random floor drawn from [0, noise_base]. The floor is
    independent of the label and the gain is a per-utterance draw from
    [gain_low, gain_high], so the noise level brackets the label rather than
    encoding it exactly: a lightly corrupted utterance can sound as noisy as a
    clean one, and the same WER can sound quieter or louder across utterances.

    An empty word list (everything deleted) renders one word slot of silence
    so the clip still has audio to carry the noise.

    Draw order (one shared stream): floor, gain, then the noise vector. The
    noise vector is only drawn when the resulting amplitude is positive.
    """
    samples_per_word = int(round(TONE_SECONDS * TARGET_RATE))
    t = np.arange(samples_per_word) / TARGET_RATE
    parts = [0.25 * np.sin(2.0 * np.pi * word_frequency(i) * t) for i in word_indices]
    if parts:
        audio = np.concatenate(parts)
    else:
        audio = np.zeros(samples_per_word)
    floor = rng.uniform(0.0, cfg.noise_base)
    gain = rng.uniform(cfg.gain_low, cfg.gain_high)
    sigma = floor + cfg.noise_scale * wer * gain
    if sigma > 0:
        audio = audio + rng.normal(0.0, sigma, size=len(audio))
    return audio


def gen_corpus(cfg: SimConfig, out_dir) -> Manifest:
    """Write one WAV per utterance under out_dir and return the labeled manifest.

    Deterministic in cfg.seed: each utterance uses its own generator keyed by
    (seed, index), so corpora of different sizes share a common prefix.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inventory = [word_name(i) for i in range(cfg.vocab_size)]
    word_index = {word: i for i, word in enumerate(inventory)}
    splits = (cfg.p_sub, cfg.p_del, cfg.p_ins)
    utterances = []
    for idx in range(cfg.n_utterances):
        rng = np.random.default_rng([cfg.seed, idx])
        n_words = int(rng.integers(cfg.min_words, cfg.max_words + 1))
        ref_indices = rng.integers(0, cfg.vocab_size, size=n_words)
        ref_words = [inventory[i] for i in ref_indices]
        if rng.uniform() < cfg.p_clean:
            rate = 0.0
        else:
            span = rng.uniform() ** cfg.rate_power
            rate = cfg.rate_low + (cfg.rate_high - cfg.rate_low) * span
        hyp_words = corrupt(ref_words, rate, splits, inventory, rng)
        ref_text = " ".join(ref_words)
        hyp_text = " ".join(hyp_words)
        wer = compute_wer(ref_text, hyp_text)
        hyp_indices = [word_index[w] for w in hyp_words]
        audio = render_audio(hyp_indices, wer, cfg, rng)
        utt_id = f"utt{idx:05d}"
        wav_path = out / f"{utt_id}.wav"
        write_wav(wav_path, audio, TARGET_RATE)
        utterances.append(Utterance(
            id=utt_id, lang=cfg.lang, wav=str(wav_path),
            dur=len(audio) / TARGET_RATE, hyp=hyp_text, ref=ref_text, wer=wer,
        ))
    return Manifest(tuple(utterances))
