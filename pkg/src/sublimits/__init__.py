"""Local limits of random graphs from subcritical block-stable classes.

Truncated-series solvers for the rooted generating functions, singularity
constants, link measures and limit-chain sampling, exhaustive oracles, and a
similarity pseudometric on countable rooted graphs.
"""

__version__ = "0.1.0"

from .graphs import BlockCutTree, GraphError, RootedGraph, block_cut_tree, canonical_rooted
from .series import (
    AsymptoticsMismatchError,
    NotSubcriticalError,
    SeriesError,
    SingularityData,
    TruncatedSeries,
    exp_series,
    find_singularity,
    fit_asymptotics,
    level_series,
    solve_labelled_class,
    solve_unlabelled_class,
    substitute_powers,
)
from .classes import (
    BlockClass,
    ClassError,
    CycleIndex,
    builtin,
    custom_labelled,
    custom_unlabelled,
    cycle_index_derived_block,
    load_class,
)
from .enumeration import (
    all_class_members_labelled,
    all_labelled_trees,
    all_unlabelled_rooted_members,
    all_unlabelled_rooted_trees,
    class_contains,
    fringe_count,
    matches_chain,
    sample_uniform_rooted,
)
from .limits import (
    ChainPrefix,
    Link,
    MassCutoffError,
    bs_chain_probability,
    chain_graph,
    chain_probability,
    enumerate_links,
    leaf_link,
    link_labellings,
    link_mass_by_size,
    mu_fringe_labelled,
    mu_fringe_unlabelled,
    p_link,
    q_link,
    sample_limit_chain,
)
from .metric import (
    CoreUndefinedError,
    DslError,
    Fan,
    FanInf,
    Finite,
    GraphFamily,
    Join,
    JoinAll,
    OmegaMarkedGraph,
    Path,
    Rado,
    Ray,
    Star,
    StarInf,
    ball_census,
    core,
    d_neighbourhood,
    d_value,
    parse_family,
    radius_similarity,
)
