"""softrec: socially regularized tag recommendation with soft clustering.

A matrix-factorization recommender over user-item-tag data whose user
factors are pulled together along friendship edges, weighted either by
a hard-cluster similarity mixture or by fuzzy membership agreement,
plus a user-item correlation regularizer. Ships with Pop / u-CF /
SoReg baselines, a precision/recall evaluation harness, and a
reproducible experiment CLI.
"""

__version__ = "0.1.0"

from .affinity import (
    CorrelationTable,
    SimilarityTable,
    build_correlation_table,
    build_similarity_table,
    corr,
    cos_tags,
    sim_hard,
    sim_soft,
)
from .baselines import (
    FactorScorer,
    PopScorer,
    UCFScorer,
    pop_score,
    soreg_train,
    ucf_score,
)
from .clustering import ClusterModel, cmeans, fcm_memberships, kmeans
from .corpus import (
    DataSplit,
    FriendshipGraph,
    IdMap,
    ScalarView,
    TagTensor,
    load_friendships,
    load_interactions,
    prune,
    split,
    user_profile_matrix,
    user_tag_profile,
)
from .errors import SoftrecError
from .evaluator import EvalReport, evaluate, sweep, top_k
from .factorizer import (
    LatentFactors,
    TrainingConfig,
    TrainReport,
    grad_item,
    grad_user,
    load_checkpoint,
    loss,
    predict,
    predict_user,
    save_checkpoint,
    train,
)
from .synthetic import SyntheticConfig, generate, write_corpus
