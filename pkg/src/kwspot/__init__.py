"""Small-footprint wakeword spotting with attention-augmented CRNNs.

Offline and streaming inference (parallel decoder bank or batched hyper
GRU), model footprint accounting, detection with endpoint and latency
measurement, and false-accept evaluation at a fixed miss rate.
"""

from .detect import DetectionEvent, DetectorConfig, StreamPosterior, detect, endpoint_delta, latency
from .evaluate import ScoreSet, det_sweep, fa_at_mr, load_manifest, score_dataset
from .frontend import AudioBuffer, compute_lfbe, delta_lfbe, read_wav, write_wav
from .models import (
    FootprintReport,
    ModelConfig,
    count_multiplies,
    count_parameters,
    receptive_field,
    reference_config,
    reference_names,
)
from .network import Network
from .streaming import DecoderBank, HyperGruDecoder, StreamEngine
from .weights import WeightSet, load_weights, random_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "DecoderBank",
    "DetectionEvent",
    "DetectorConfig",
    "FootprintReport",
    "HyperGruDecoder",
    "ModelConfig",
    "Network",
    "ScoreSet",
    "StreamEngine",
    "StreamPosterior",
    "WeightSet",
    "compute_lfbe",
    "count_multiplies",
    "count_parameters",
    "delta_lfbe",
    "det_sweep",
    "detect",
    "endpoint_delta",
    "fa_at_mr",
    "latency",
    "load_manifest",
    "load_weights",
    "random_weights",
    "read_wav",
    "receptive_field",
    "reference_config",
    "reference_names",
    "save_weights",
    "score_dataset",
    "write_wav",
    "__version__",
]
