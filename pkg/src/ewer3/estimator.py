"""End-to-end estimator: featurize -> BiLSTM -> concat with lexical vector ->
dense head -> bounded prediction. Owns parameter initialization, the training
loop, model persistence, and corpus-level prediction.

Model file EWM1 (little-endian): magic b"EWM1"; uint32 version (=1); uint32
JSON header length; UTF-8 JSON header (dims + config echo, sorted keys); then
every parameter tensor as float64, row-major, in the fixed traversal order

    embedding,
    fwd.w_i, fwd.w_f, fwd.w_g, fwd.w_o, fwd.u_i, .., fwd.u_o, fwd.b_i, .., fwd.b_o,
    bwd likewise,
    fc1.weight, fc1.bias, fc2.weight, fc2.bias, out.weight, out.bias.

Initialization draws tensors in that same order from the seeded generator,
each uniform(-k, k) with k = 1/sqrt(fan_in): fan_in is the input width of the
map the tensor belongs to (D for input weights, H for recurrent weights and
LSTM biases, the layer input width for dense weights and biases, and the
embedding width for the embedding table).
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import metrics, nn
from .corpus import Manifest
from .errors import DataError, FormatError, UndefinedMetricError
from .featurize import (
    FeaturizerConfig,
    lexical_tokenize,
    load_features,
    load_lexical,
    logmel,
    read_wav,
)

MODEL_MAGIC = b"EWM1"
MODEL_VERSION = 1


@dataclass
class EstimatorParams:
    embedding: np.ndarray  # (V, D_L)
    fwd: nn.LstmParams
    bwd: nn.LstmParams
    fc1: nn.DenseParams
    fc2: nn.DenseParams
    out: nn.DenseParams
    zero_acoustic: bool = False  # ablation: acoustic branch replaced by zeros

    def tensors(self) -> dict:
        """All trainable tensors, in the documented traversal order."""
        ordered = {"embedding": self.embedding}
        for prefix, direction in (("fwd", self.fwd), ("bwd", self.bwd)):
            for kind in ("w", "u", "b"):
                for gate in nn.GATES:
                    ordered[f"{prefix}.{kind}_{gate}"] = getattr(direction, f"{kind}_{gate}")
        for name, dense in (("fc1", self.fc1), ("fc2", self.fc2), ("out", self.out)):
            ordered[f"{name}.weight"] = dense.weight
            ordered[f"{name}.bias"] = dense.bias
        return ordered

    @property
    def dims(self) -> dict:
        return {
            "vocab_size": self.embedding.shape[0],
            "embed_dim": self.embedding.shape[1],
            "feat_dim": self.fwd.input_dim,
            "hidden": self.fwd.hidden,
            "fc1": self.fc1.weight.shape[0],
            "fc2": self.fc2.weight.shape[0],
        }


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    epochs: int = 20
    learning_rate: float = 1e-3
    dropout: float = 0.1
    batch_size: int = 16
    hidden: int = 64
    fc1: int = 64
    fc2: int = 32
    freeze_lexical: bool = False
    zero_acoustic: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError("dropout must be in [0, 1)")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.hidden < 1 or self.fc1 < 1 or self.fc2 < 1:
            raise DataError("layer sizes must be >= 1")
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be > 0")


@dataclass(frozen=True)
class EpochStats:
    train_loss: float
    dev_loss: Optional[float]
    dev_pcc: Optional[float]


@dataclass
class Example:
    """A manifest record resolved to model inputs."""

    id: str
    features: np.ndarray
    dur: float
    token_ids: Optional[list] = None
    lex_vector: Optional[np.ndarray] = None
    target: Optional[float] = None


def _init_spec(vocab_size, embed_dim, feat_dim, hidden, fc1, fc2):
    concat = 2 * hidden + embed_dim
    yield "embedding", (vocab_size, embed_dim), embed_dim
    for prefix in ("fwd", "bwd"):
        for gate in nn.GATES:
            yield f"{prefix}.w_{gate}", (hidden, feat_dim), feat_dim
        for gate in nn.GATES:
            yield f"{prefix}.u_{gate}", (hidden, hidden), hidden
        for gate in nn.GATES:
            yield f"{prefix}.b_{gate}", (hidden,), hidden
    yield "fc1.weight", (fc1, concat), concat
    yield "fc1.bias", (fc1,), concat
    yield "fc2.weight", (fc2, fc1), fc1
    yield "fc2.bias", (fc2,), fc1
    yield "out.weight", (1, fc2), fc2
    yield "out.bias", (1,), fc2


def _assemble(tensors: dict, zero_acoustic: bool = False) -> EstimatorParams:
    def direction(prefix):
        return nn.LstmParams(*(tensors[f"{prefix}.{kind}_{gate}"]
                               for kind in ("w", "u", "b") for gate in nn.GATES))

    return EstimatorParams(
        embedding=tensors["embedding"],
        fwd=direction("fwd"),
        bwd=direction("bwd"),
        fc1=nn.DenseParams(tensors["fc1.weight"], tensors["fc1.bias"]),
        fc2=nn.DenseParams(tensors["fc2.weight"], tensors["fc2.bias"]),
        out=nn.DenseParams(tensors["out.weight"], tensors["out.bias"]),
        zero_acoustic=zero_acoustic,
    )


def init_params(rng, vocab_size, embed_dim, feat_dim, hidden, fc1, fc2,
                zero_acoustic: bool = False) -> EstimatorParams:
    tensors = {}
    for name, shape, fan_in in _init_spec(vocab_size, embed_dim, feat_dim, hidden, fc1, fc2):
        k = 1.0 / np.sqrt(fan_in)
        tensors[name] = rng.uniform(-k, k, size=shape)
    return _assemble(tensors, zero_acoustic)


def _companion_lexical_path(feat_path: str) -> Path:
    return Path(feat_path).with_suffix(".ewl1")


def resolve_examples(manifest: Manifest, feat_cfg: FeaturizerConfig,
                     require_label: bool = False, feature_cache: Optional[dict] = None):
    """Turn manifest records into model inputs.

    WAV sources run through the log-mel featurizer; feat sources load EWF1
    files, using a companion .ewl1 file as a fixed lexical vector when one
    sits next to the EWF1 (otherwise the hypothesis is hash-tokenized).
    Either every example or none may use fixed lexical vectors.
    """
    examples = []
    for utt in manifest:
        if require_label and utt.wer is None:
            raise DataError(f"utterance {utt.id!r} has no wer label")
        try:
            if feature_cache is not None and utt.audio_source in feature_cache:
                feats = feature_cache[utt.audio_source]
            elif utt.wav is not None:
                feats = logmel(read_wav(utt.wav), feat_cfg)
            else:
                feats = load_features(utt.feat)
                if feat_cfg.max_frames and len(feats) > feat_cfg.max_frames:
                    feats = feats[: feat_cfg.max_frames]
            if feature_cache is not None:
                feature_cache[utt.audio_source] = feats
            lex_vector = None
            if utt.feat is not None:
                companion = _companion_lexical_path(utt.feat)
                if companion.exists():
                    lex_vector = load_lexical(companion)
        except (DataError, OSError) as exc:
            raise DataError(f"utterance {utt.id!r}: {exc}") from None
        token_ids = None
        if lex_vector is None:
            token_ids = lexical_tokenize(utt.hyp, feat_cfg)
        examples.append(Example(id=utt.id, features=feats, dur=utt.dur,
                                token_ids=token_ids, lex_vector=lex_vector,
                                target=utt.wer))
    fixed = [ex.id for ex in examples if ex.lex_vector is not None]
    if fixed and len(fixed) != len(examples):
        raise DataError(
            "mixed lexical sources: companion .ewl1 vectors found for "
            f"{len(fixed)}/{len(examples)} utterances (first: {fixed[0]!r}); "
            "either all utterances or none may carry them"
        )
    dims = {ex.features.shape[1] for ex in examples}
    if len(dims) > 1:
        raise DataError(f"inconsistent feature dims across corpus: {sorted(dims)}")
    return examples


def _infer_dims(examples, cfg: TrainConfig, feat_cfg: FeaturizerConfig) -> dict:
    feat_dim = examples[0].features.shape[1]
    if examples[0].lex_vector is not None:
        lengths = {len(ex.lex_vector) for ex in examples}
        if len(lengths) > 1:
            raise DataError(f"inconsistent lexical vector dims: {sorted(lengths)}")
        embed_dim = lengths.pop()
    else:
        embed_dim = feat_cfg.embed_dim
    return {
        "vocab_size": feat_cfg.vocab_size,
        "embed_dim": embed_dim,
        "feat_dim": feat_dim,
        "hidden": cfg.hidden,
        "fc1": cfg.fc1,
        "fc2": cfg.fc2,
    }


def predict_example(params: EstimatorParams, example: Example) -> float:
    pred, _ = nn.forward_example(
        params, example.features,
        token_ids=example.token_ids, lex_vector=example.lex_vector,
        training=False, zero_acoustic=params.zero_acoustic,
    )
    return pred


def predict_one(params: EstimatorParams, features, hypothesis: str) -> float:
    """Deterministic inference for one utterance from features and hypothesis text."""
    vocab_size = params.embedding.shape[0]
    from .featurize import stable_hash

    token_ids = [stable_hash(w) % vocab_size for w in hypothesis.split()]
    pred, _ = nn.forward_example(params, features, token_ids=token_ids,
                                 training=False, zero_acoustic=params.zero_acoustic)
    return pred


def train(train_manifest: Manifest, dev_manifest: Manifest, cfg: TrainConfig,
          feat_cfg: Optional[FeaturizerConfig] = None,
          feature_cache: Optional[dict] = None, progress=None):
    """Train from scratch; returns (EstimatorParams, list of EpochStats).

    Deterministic in cfg.seed: initialization, epoch shuffles, and dropout
    masks all consume one seeded generator in a fixed order. The final-epoch
    parameters are returned; per-epoch dev metrics are only recorded.
    """
    feat_cfg = feat_cfg or FeaturizerConfig()
    if len(train_manifest) == 0:
        raise DataError("empty training set")
    examples = resolve_examples(train_manifest, feat_cfg, require_label=True,
                                feature_cache=feature_cache)
    dev_examples = resolve_examples(dev_manifest, feat_cfg, require_label=True,
                                    feature_cache=feature_cache)
    dims = _infer_dims(examples, cfg, feat_cfg)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(rng, **dims, zero_acoustic=cfg.zero_acoustic)
    tensors = params.tensors()
    state = nn.AdamState.for_tensors(tensors)
    n = len(examples)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        squared_error_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            preds, caches, targets = [], [], []
            for idx in batch:
                ex = examples[idx]
                pred, cache = nn.forward_example(
                    params, ex.features,
                    token_ids=ex.token_ids, lex_vector=ex.lex_vector,
                    dropout_rate=cfg.dropout, training=True, rng=rng,
                    zero_acoustic=cfg.zero_acoustic,
                )
                preds.append(pred)
                caches.append(cache)
                targets.append(ex.target)
            grads = nn.backward(params, caches, preds, targets)
            if cfg.freeze_lexical:
                grads["embedding"].fill(0.0)
            nn.adam_step(tensors, grads, state, cfg.learning_rate)
            for pred, target in zip(preds, targets):
                squared_error_sum += (pred - target) ** 2
        train_loss = squared_error_sum / n
        dev_loss = dev_pcc = None
        if dev_examples:
            dev_preds = [predict_example(params, ex) for ex in dev_examples]
            dev_targets = [ex.target for ex in dev_examples]
            dev_loss = nn.mse_loss(dev_preds, dev_targets)
            try:
                dev_pcc = metrics.pcc(dev_preds, dev_targets)
            except (UndefinedMetricError, DataError):
                dev_pcc = None
        stats = EpochStats(train_loss=train_loss, dev_loss=dev_loss, dev_pcc=dev_pcc)
        history.append(stats)
        if progress is not None:
            progress(epoch, stats)
    return params, history


def predict_corpus(params: EstimatorParams, manifest: Manifest,
                   feat_cfg: Optional[FeaturizerConfig] = None,
                   feature_cache: Optional[dict] = None):
    """One (id, predicted wer, duration) triple per utterance, in manifest order."""
    feat_cfg = feat_cfg or FeaturizerConfig()
    examples = resolve_examples(manifest, feat_cfg, feature_cache=feature_cache)
    return [(ex.id, predict_example(params, ex), ex.dur) for ex in examples]


def save_model(params: EstimatorParams, cfg: TrainConfig,
               feat_cfg: FeaturizerConfig, path) -> None:
    header = {
        "dims": params.dims,
        "zero_acoustic": params.zero_acoustic,
        "train_config": {
            "seed": cfg.seed, "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate, "dropout": cfg.dropout,
            "batch_size": cfg.batch_size, "hidden": cfg.hidden,
            "fc1": cfg.fc1, "fc2": cfg.fc2,
            "freeze_lexical": cfg.freeze_lexical,
            "zero_acoustic": cfg.zero_acoustic,
        },
        "featurizer": {
            "window_samples": feat_cfg.window_samples,
            "hop_samples": feat_cfg.hop_samples,
            "n_mels": feat_cfg.n_mels, "log_floor": feat_cfg.log_floor,
            "vocab_size": feat_cfg.vocab_size, "embed_dim": feat_cfg.embed_dim,
            "max_frames": feat_cfg.max_frames,
        },
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_VERSION, len(blob)))
        fh.write(blob)
        for tensor in params.tensors().values():
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_model(path, expect_dims: Optional[dict] = None):
    """Load an EWM1 file; returns (EstimatorParams, TrainConfig, FeaturizerConfig).

    `expect_dims` cross-checks selected dims (e.g. {"hidden": 32}) and raises
    on mismatch.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic (EWM1 expected)")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if len(blob) < 12 + header_len:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FormatError(f"{path}: corrupt header") from None
    dims = header["dims"]
    if expect_dims:
        for key, value in expect_dims.items():
            if dims.get(key) != value:
                raise FormatError(
                    f"{path}: dimension mismatch for {key}: file has {dims.get(key)}, "
                    f"expected {value}"
                )
    offset = 12 + header_len
    tensors = {}
    for name, shape, _ in _init_spec(dims["vocab_size"], dims["embed_dim"],
                                     dims["feat_dim"], dims["hidden"],
                                     dims["fc1"], dims["fc2"]):
        count = int(np.prod(shape))
        end = offset + count * 8
        if end > len(blob):
            raise FormatError(f"{path}: truncated payload at tensor {name!r}")
        tensors[name] = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes")
    params = _assemble(tensors, bool(header.get("zero_acoustic", False)))
    tc = header["train_config"]
    cfg = TrainConfig(
        seed=tc["seed"], epochs=tc["epochs"], learning_rate=tc["learning_rate"],
        dropout=tc["dropout"], batch_size=tc["batch_size"], hidden=tc["hidden"],
        fc1=tc["fc1"], fc2=tc["fc2"], freeze_lexical=tc["freeze_lexical"],
        zero_acoustic=tc.get("zero_acoustic", False),
    )
    fz = header["featurizer"]
    feat_cfg = FeaturizerConfig(
        window_samples=fz["window_samples"], hop_samples=fz["hop_samples"],
        n_mels=fz["n_mels"], log_floor=fz["log_floor"],
        vocab_size=fz["vocab_size"], embed_dim=fz["embed_dim"],
        max_frames=fz.get("max_frames", 0),
    )
    return params, cfg, feat_cfg


def gradient_check(seeds=range(10), feat_dim=3, hidden=4, embed_dim=2,
                   fc1=5, fc2=3, vocab_size=8, eps=1e-5) -> float:
    """Max relative error of analytic vs central finite-difference gradients.

    Runs the full model (embedding, both LSTM directions, head) at tiny dims
    on a small random batch per seed, dropout off so the loss is smooth.
    """
    worst = 0.0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        params = init_params(rng, vocab_size, embed_dim, feat_dim, hidden, fc1, fc2)
        batch = []
        for t_steps, n_tokens in ((3, 2), (2, 4), (4, 0)):
            feats = rng.normal(size=(t_steps, feat_dim))
            ids = list(rng.integers(0, vocab_size, size=n_tokens))
            batch.append((feats, ids))
        targets = rng.uniform(0.0, 1.0, size=len(batch))

        def batch_loss():
            preds, caches = [], []
            for feats, ids in batch:
                pred, cache = nn.forward_example(params, feats, token_ids=ids)
                preds.append(pred)
                caches.append(cache)
            return preds, caches

        preds, caches = batch_loss()
        grads = nn.backward(params, caches, preds, targets)
        for name, tensor in params.tensors().items():
            grad = grads[name]
            flat = tensor.reshape(-1)
            for idx in range(flat.size):
                original = flat[idx]
                flat[idx] = original + eps
                up = nn.mse_loss(batch_loss()[0], targets)
                flat[idx] = original - eps
                down = nn.mse_loss(batch_loss()[0], targets)
                flat[idx] = original
                numeric = (up - down) / (2.0 * eps)
                analytic = grad.reshape(-1)[idx]
                denom = max(abs(analytic), abs(numeric), 1e-8)
                worst = max(worst, abs(analytic - numeric) / denom)
    return worst
