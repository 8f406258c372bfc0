"""Sketch-constrained image generation by joint-image completion.

Train a GAN on side-by-side sketch|photo joint images, then generate the
missing half of a partially observed joint image by projecting it onto
the generator's latent manifold (gradient descent on z through frozen
networks) and compositing the result.
"""

from .autodiff import Tensor
from .models import (ArchDescriptor, DiscriminatorNet, GeneratorNet, LatentVector,
                     ModelBundle, desk_descriptor, generate, discriminate, load_bundle,
                     full_scale_descriptor, sample_latent, save_bundle)
from .sketch import (JointImage, Mask, SketchStyle, STYLE_PRESETS, get_style,
                     make_joint, make_mask, split_joint, xdog,
                     SKETCH_TO_IMAGE, IMAGE_TO_SKETCH)
from .data import Corpus, CorpusSpec, augment, build_corpus, generate_procedural, ingest_folder
from .training import TrainConfig, TrainingDiverged, finetune, resume, train
from .projection import (ProjectionConfig, ProjectionTrace, complete, composite,
                         contextual_loss, corrupted_joint, initialize,
                         perceptual_loss, project, stochastic_clip)
from .evaluation import EvalConfig, EvalReport, evaluate, reextraction_score, ssim

__version__ = "0.1.0"
