from .analysis import class_prototypes, inter_prototype_similarity
from .inputs import GraphInputs, gcn_inputs, gine_inputs, mean_adjacency, normalized_adjacency, rgcn_inputs
from .models import (
    ARCHITECTURES,
    GCN,
    GINE,
    RGCN,
    ModelSpec,
    build_model,
    forward_gcn,
    forward_gine,
    forward_rgcn,
)
from .training import (
    EvalRecord,
    GridResult,
    TrainConfig,
    TrainedModel,
    accuracy,
    cross_entropy,
    default_grid,
    grid_search,
    load_model,
    log_softmax,
    loss_and_grad,
    save_model,
    softmax,
    train,
    write_leaderboard,
)
