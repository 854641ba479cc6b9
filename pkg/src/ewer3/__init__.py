"""Reference-free speech transcription quality estimation.

Predicts word error rate for (audio, ASR hypothesis) pairs with a BiLSTM over
acoustic frames joined to a pooled lexical embedding, trained end to end on
exact alignment-oracle labels.
"""

from .corpus import Manifest, Utterance, compute_wer, filter_duration, label_corpus, load_manifest, save_manifest
from .errors import DataError, FormatError, ManifestError, NumericError, UndefinedMetricError
from .estimator import EstimatorParams, TrainConfig, gradient_check, load_model, predict_corpus, predict_one, save_model, train
from .featurize import AudioClip, FeaturizerConfig, load_features, load_lexical, logmel, read_wav, save_features, save_lexical, write_wav
from .metrics import EvalReport, cumulative_curve, density_histogram, evaluate, ewer3_aggregate, pcc, rmse, write_report
from .sampling import binned_dev_split, downsample_zero
from .simgen import SimConfig, gen_corpus

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "DataError", "EstimatorParams", "EvalReport", "FeaturizerConfig",
    "FormatError", "Manifest", "ManifestError", "NumericError", "SimConfig",
    "TrainConfig", "UndefinedMetricError", "Utterance", "binned_dev_split",
    "compute_wer", "cumulative_curve", "density_histogram", "downsample_zero",
    "evaluate", "ewer3_aggregate", "filter_duration", "gen_corpus",
    "gradient_check", "label_corpus", "load_features", "load_lexical",
    "load_manifest", "load_model", "logmel", "pcc", "predict_corpus",
    "predict_one", "read_wav", "rmse", "save_features", "save_lexical",
    "save_manifest", "save_model", "train", "write_report", "write_wav",
]
