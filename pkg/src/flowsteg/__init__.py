"""flowsteg: leak-free style transfer with recoverable content.

An invertible flow network maps images to latent features and back without
reconstruction loss; an unbiased adaptive instance-norm transfer swaps style
factors in latent space; a steganographic encoder hides the content latent
inside the stylized image so later stylizations or de-stylization can recover
the original content exactly up to decoder error.
"""

from .tensor import (DEFAULT_DTYPE, EPS_VAR, ChannelStats, ShapeError,
                     as_tensor, channel_stats, conv2d, conv2d_backward, grad_check)
from .flow import (FlowConfig, FlowModel, SingularMatrix, SingularScale,
                   squeeze, unsqueeze)
from .transfer import (UnbiasednessReport, adain, content_factor, style_factor,
                       stylize, verify_unbiased)
from .perceptual import (FeatureExtractor, content_loss, extract as extract_features,
                         perceptual_content_loss, style_loss)
from .stego import (StegoDecoder, StegoEncoder, StegoLossWeights, embed, extract,
                    grid_to_payload, image_loss, message_loss, payload_to_grid, stego_loss)
from .pipeline import (Checkpoint, ConfigError, Corpus, DivergenceError, FormatError,
                       TrainConfig, adam_step, AdamState, load_checkpoint, load_corpus,
                       pair_styles, restore_flow, restore_stego, save_checkpoint,
                       synth_corpus, train_stage1, train_stage2)
from .evaluation import (DriftCurve, LossyBaseline, drift_experiment, l2_metric,
                         reverse_eval, serial_eval, ssim_metric, train_baseline)

__version__ = "0.1.0"
