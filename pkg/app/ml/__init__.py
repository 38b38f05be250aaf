from .losses import (
    QuadrupletDistances,
    BatchDistanceStats,
    PairExample,
    HeadLogits,
    LossTerm,
    contrastive_loss,
    triplet_loss,
    classification_loss,
    joint_loss,
    global_loss,
    combined_loss,
    combined_loss_grad,
)
from .mining import (
    QuadrupletMiner,
    select_hardest_negative,
    select_positives_method1,
    select_positives_method2,
    select_random_quadruplet,
    build_quadruplet_batch,
)
from .encoder import (
    EncoderParams,
    QuadrupletInputs,
    init_params,
    forward,
    backward,
    sgd_momentum_step,
    grad_check,
)
from .metrics import recall_at_k, kmeans, nmi, evaluate
from .trainer import Trainer, TrainResult, train, embed_dataset

__all__ = [
    'QuadrupletDistances',
    'BatchDistanceStats',
    'PairExample',
    'HeadLogits',
    'LossTerm',
    'contrastive_loss',
    'triplet_loss',
    'classification_loss',
    'joint_loss',
    'global_loss',
    'combined_loss',
    'combined_loss_grad',
    'QuadrupletMiner',
    'select_hardest_negative',
    'select_positives_method1',
    'select_positives_method2',
    'select_random_quadruplet',
    'build_quadruplet_batch',
    'EncoderParams',
    'QuadrupletInputs',
    'init_params',
    'forward',
    'backward',
    'sgd_momentum_step',
    'grad_check',
    'recall_at_k',
    'kmeans',
    'nmi',
    'evaluate',
    'Trainer',
    'TrainResult',
    'train',
    'embed_dataset',
]
