"""itemdiff: vertical scaling of item p-values and difficulty prediction.

The package turns grade-level proportion-correct values into item easiness
on a common logit scale, annotates items with context, test-design, text,
and embedding predictors, and evaluates ridge-regression difficulty models
under a repeated cross-validation protocol.
"""

from .bank import (
    BankFormatError,
    Context,
    Item,
    ItemBank,
    Passage,
    context_features,
    load_item_bank,
    parse_item_bank,
    serialize_item_bank,
    test_features,
)
from .embeddings import (
    EmbeddingInputVariant,
    EmbeddingRecord,
    EmbeddingStore,
    build_embedding_input,
    cosine_similarity,
    distractor_similarity_features,
    embeddings_to_features,
    fetch_embeddings,
)
from .evaluation import (
    CvPlan,
    EvalConfig,
    EvalReport,
    SplitPlan,
    baseline_mean,
    evaluate,
    make_cv_plan,
    pearson,
    rmse,
    split,
    tune_lambda,
)
from .features import FeatureTable, assemble_features, import_feature_table
from .numerics import (
    PcaModel,
    RidgeModel,
    StandardizationParams,
    pca_fit,
    pca_transform,
    ridge_fit,
    ridge_predict,
    standardize_apply,
    standardize_fit,
)
from .runner import (
    FeatureSetSpec,
    RunConfig,
    emit_reports,
    robustness_sweep,
    run_grid,
    standard_grid_preset,
)
from .scales import (
    AbilityScale,
    Affine,
    BUILTIN_SCALES,
    CompositeScale,
    fit_affine_from_anchors,
    get_scale,
    invert_easiness,
    logit,
    normalized_theta,
    rescale_pvalue,
    sigmoid,
)
from .synthetic import generate_synthetic_bank, write_synthetic_dataset
from .text import (
    ConnectiveLexicon,
    connective_incidence,
    descriptive_metrics,
    flesch_kincaid,
    lexical_diversity,
    segment,
    text_feature_table,
)

__version__ = "0.1.0"
