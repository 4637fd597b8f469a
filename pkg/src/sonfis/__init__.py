"""Granular-computing toolkit for spatial permeability estimation.

Borehole decision tables are condensed into crisp granules by batch
self-organizing maps, then modelled either by a rough-set rule engine or a
TSK neuro-fuzzy system; a close-open search picks the granularity that
scores best on held-out data.
"""

__version__ = "0.1.0"

from .tabular import (
    AttributeMeta,
    DecisionTable,
    TableError,
    clamp_lugeon,
    compute_lugeon,
    encode_twr,
    load_table,
    rmse,
    save_table,
    site_schema,
    split,
)
from .som import SelfOrganizingMap, SomDiscretizer
from .rough import (
    DecisionRule,
    DiscernMatrix,
    Partition,
    RuleClassifier,
    RuleSet,
    classify,
    classify_many,
    discernibility_matrix,
    export_rules,
    format_rules,
    indiscernibility_partition,
    induce_rules,
    load_rules,
    lower_approximation,
    parse_rules,
    reducts,
    upper_approximation,
)
from .tsk import (
    GaussianMf,
    TskModel,
    TskRegressor,
    TskRule,
    gaussian_mf,
    gradient_check,
    grid_partition_model,
    infer,
    init_tsk,
    lse_consequents,
    subtractive_cluster,
    train_hybrid,
)
from .search import (
    RandomGrowth,
    RegularGrowth,
    RstPredictor,
    SonfisConfig,
    SonfisResult,
    TrialRecord,
    derive_seed,
    grid_shape_for,
    run_sonfis_r,
    run_sorst,
)
from .geo import (
    ScalarField,
    SiteSpec,
    evaluate_grid,
    export_field,
    generate_synthetic_site,
    read_field,
    variation_field,
)

__all__ = [name for name in dir() if not name.startswith("_")]
