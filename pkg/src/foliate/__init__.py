"""Point patterns, point-shifts, and their discrete foliations."""

from .patterns import (
    TORUS,
    WINDOW,
    ConfigError,
    Domain,
    PatternError,
    Point,
    PointPattern,
    crop,
    distance,
    is_censored,
    lex_compare,
    translate,
)
from .generators import GenSpec, gen_bernoulli_grid, gen_poisson, gen_poisson_cluster, generate
from .shifts import (
    ShiftKind,
    ShiftMap,
    condenser_marks,
    eval_condenser,
    eval_mnn,
    eval_multitype_strip,
    eval_next_row,
    eval_strip,
    evaluate,
)
from .foliation import (
    DescendantStats,
    FoliationResult,
    LadderReport,
    build_components,
    classify,
    descendant_stats,
    foliate,
    ladder_diagnostic,
    primeval_set,
)
from .stable import (
    RlsOrder,
    StableMaps,
    build_f_perp,
    build_h_dense,
    build_rls_order,
    build_stable_maps,
    delta,
    dfs_preorder,
)
from .palm import (
    Realization,
    StatReport,
    check_mass_transport,
    evaporation_profile,
    markability_diagnostic,
    palm_mean,
    relative_intensity,
    verify_identities,
)

__version__ = "0.1.0"
