"""Token-grid compression, influence-based data selection and ablation analysis."""

from tge._core import (  # noqa: F401
    AblationSpec,
    AdapterModel,
    AffinityConfig,
    AttentionMap,
    BackgroundLexicon,
    DataSample,
    EncodedOutput,
    EncoderParams,
    Error,
    FlopsModel,
    GradientFeature,
    GridLayout,
    Neighborhood,
    PixelBox,
    ProjectionSketch,
    RetainedTokens,
    SelectionConfig,
    TokenGrid,
    ablate_tokens,
    adapter_loss_and_gradient,
    background_score,
    buffer_ring,
    cluster_grid,
    compress_grid,
    compress_image,
    default_flops_model,
    degradation_metric,
    detect_register_tokens,
    encode,
    estimate_flops,
    fit_flops_model,
    format_thousands,
    grow_cluster,
    influence_score,
    load_grid,
    logit_lens,
    patch_count,
    pool_baseline,
    project_gradient,
    prune_background,
    rank_and_select,
    save_grid,
    select_anchored,
    sgd_step,
    softmax_attention,
    token_budget,
    tokens_from_bbox,
    warmup_and_featurize,
)

__version__ = "0.1.0"
