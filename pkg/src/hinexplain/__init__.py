"""Minimum counterfactual explanations for Personalized PageRank recommenders
over heterogeneous information networks."""

__version__ = "0.1.0"

from .baselines import baseline_sweep, explain_hc, explain_sp
from .corpus import SynthParams, generate_synth, graph_stats, load_graph, save_graph
from .errors import *  # noqa: F401,F403
from .explain import (
    ExplainConfig,
    ExplainMethod,
    Explanation,
    ScoreMode,
    Status,
    compute_scores,
    contribution_diffs,
    decompose_ppr,
    explain,
    greedy_swap,
    swap_order,
    verify_counterfactual,
)
from .graph import (
    ActionSet,
    EdgeType,
    HinGraph,
    NodeType,
    TransitionView,
    build_graph,
    make_transition_view,
    remove_actions_view,
    user_actions,
)
from .oracle import brute_force_explain, exact_ppr
from .ppr import (
    PprEstimate,
    PushState,
    ppr_column,
    ppr_power,
    ppr_reverse_push,
    push_update_remove_actions,
    top_k_items,
)
