"""Wi-Fi RSS fingerprint indoor localization.

Hybrid floor-classification + 2D coordinate regression and a 3D-regression
reference model (both with denoising-autoencoder pretraining), a powed/
Sorensen kNN baseline, and a seeded multi-run evaluation harness.
"""

from .data import (FingerprintDataset, FingerprintRecord, NormalizationSpec,
                   floor_to_z, load_dataset, normalize_coords, normalize_rss,
                   one_hot_floor, save_dataset, split_validation,
                   synth_dataset, synth_dataset_pair, z_to_floor)
from .errors import (ChecksumError, ConfigError, DomainError, LocfitError,
                     NumericError, ParseError, SchemaError)
from .knn import KnnConfig, knn_predict, powed_transform, sorensen_distance
from .metrics import (MetricSummary, ci95, floor_detection_rate,
                      mean_2d_error, mean_3d_error, summarize)
from .models import (LocModel, Prediction, SimoConfig, SisoConfig, build_simo,
                     build_siso, load_model, predict_simo, predict_siso,
                     save_model, simo_loss)
from .nn import (LayerSpec, ModelParams, NadamConfig, NadamState, NetworkSpec,
                 backward, cce_loss, forward, init_params, mse_loss,
                 nadam_step, softmax)
from .sdae import SdaeConfig, corrupt_input, pretrain_layer, pretrain_stack
from .training import (EarlyStopping, TrainConfig, TrainRunResult,
                       evaluate_model, make_simo_builder, make_siso_builder,
                       multi_run, sweep_coord_weight, train)

__version__ = "0.1.0"
__all__ = [name for name in dir() if not name.startswith("_")]
