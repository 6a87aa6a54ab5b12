"""Multi-granularity feature-fusion TDNN speaker embeddings.

A self-contained numpy implementation: minimal reverse-mode autograd
core, depthwise-separable time-frequency front end, multi-granularity
TDNN blocks with phoneme-level pooling and squeeze-excitation fusion,
statistics pooling with an AAM-softmax training head, plus FBank feature
extraction, trial scoring (EER/minDCF), complexity accounting, and a
desk-scale trainer.
"""

from .autograd import (Tensor, concat, conv1d, conv2d, gradient_gap, linear,
                       maximum, no_grad, numerical_gradient, relu,
                       same_padding, sigmoid, stack_rows)
from .config import ModelConfig
from .complexity import (ComplexityReport, count_flops, count_params,
                         verify_against_instantiation)
from .dsm import DsmFrontEnd, FrameMapping, InvertedResidual
from .errors import (AudioFormatError, ComplexityMismatchError, DimensionError,
                     TrialParseError, WeightFormatError)
from .features import (AudioSignal, FeatureMatrix, compute_fbank, crop_random,
                       mel_filter_centers, read_wav, write_wav)
from .layers import BatchNorm, Conv1d, Conv2d, Linear, Module
from .loss import AamSoftmaxHead, aam_softmax_loss
from .model import SpeakerEmbedder, statistics_pooling
from .mtdnn import MTdnnLayer, MTdnnNetwork, SqueezeExcite, phoneme_level_pool
from .scoring import (ScoreReport, Trial, TrialList, compute_eer,
                      compute_min_dcf, cosine_score, evaluate_scores,
                      parse_trials)
from .training import (SgdOptimizer, StepRecord, SyntheticDataset, TrainConfig,
                       lr_schedule, make_synthetic_dataset, smoothed_losses,
                       train)
from .weights import load_model, save_model

__version__ = "0.1.0"
