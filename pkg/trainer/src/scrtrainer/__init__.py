"""scrtrainer: unpaired image translation and scene-coordinate regression.

Implements the training side of the relocalization pipeline: the
adversarial + patch-contrastive translation objective, the masked L2
coordinate-regression loss, the networks behind them, and a desk-scale
ladder comparing blind transfer, histogram matching, adaptation, and full
supervision. Datasets and pose solving are consumed from the rendering
toolkit through its file formats and command line only.
"""

from .losses import (LossConfig, PatchFeatureBatch, cut_total_loss, gan_loss,
                     nce_term, patchnce_loss, sample_patch_features,
                     scr_l2_loss)
from .networks import (FeatureProjector, MappingNetwork, PatchDiscriminator,
                       SCRNetwork, make_projectors)
from .predict import predict_scmap, predict_to_scm
from .training import CutParams, ScrParams, train_cut, train_scr

__version__ = "0.1.0"
