"""Directed scale-free network synthesis and completion search."""

from .dataset import (
    Dataset,
    GroupId,
    SubtypeLabel,
    all_subtypes,
    build_ann1_dataset,
    build_ann2_dataset,
    feasible_subtypes,
    group_of,
    label_of,
    load_dataset,
    save_dataset,
)
from .generator import (
    ExponentTarget,
    GeneratorParams,
    GrowthProcess,
    attachment_distribution_in,
    attachment_distribution_out,
    delta_in_from_x,
    delta_out_from_x,
    feasible_triples,
    generate,
    params_from_targets,
    simplex_triples,
    x_in_from_delta,
    x_out_from_delta,
)
from .graph import (
    AdjacencyMatrix,
    DegreeStatistics,
    DirectedGraph,
    add_unconnected_nodes,
    degree_statistics,
    estimate_tail_exponent,
    load_matrix,
    save_matrix,
)
from .mlp import (
    MlpModel,
    TrainConfig,
    build_ann1,
    build_ann2,
    forward,
    forward_batch,
    gradient_check,
    load_model,
    save_model,
    train,
)
from .pipeline import (
    CandidateBudget,
    PipelineConfig,
    PipelineResult,
    PredictionReport,
    SubtypePrediction,
    enumerate_candidates,
    filter_candidates,
    predict_subtype,
    run_pipeline,
)

__version__ = "0.1.0"
