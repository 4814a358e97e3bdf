"""Consensus community detection in multilayer networks.

Builds a co-association graph from per-layer community structures, prunes
it with parameter-free generative null-model filters (or a plain
threshold), and optimizes multilayer modularity of the consensus through
intra/inter-community edge refinement, node relocation, and community
partitioning.
"""

from .consensus import (ConsensusState, lower_bound_consensus,
                        membership_state, optimize_consensus,
                        optimize_from_filtered, partition_community,
                        relocate_nodes, update_community,
                        update_community_structure)
from .coassoc import (CoassociationGraph, CoassociationMatrix,
                      build_coassociation, build_coassociation_graph)
from .ensemble import (CommunityStructure, Ensemble, build_ensemble,
                       load_ensemble, partition_weighted_graph, save_ensemble,
                       weighted_modularity)
from .errors import InputError, MismatchError, SolverError
from .filters import (EcmParameters, EdgeSignificance, FilterConfig,
                      apply_filter, ecm_fit, ecm_pvalues, filter_coassociation,
                      filter_threshold, gloss_pvalues, mlf_pvalues)
from .graphs import (MultilayerGraph, WeightedGraph, load_multilayer,
                     save_multilayer)
from .metrics import (MetricReport, ensemble_avg_nmi, metric_report,
                      multilayer_modularity, multilayer_silhouette, nmi)

__version__ = "0.1.0"

__all__ = [
    "MultilayerGraph", "WeightedGraph", "load_multilayer", "save_multilayer",
    "CommunityStructure", "Ensemble", "partition_weighted_graph",
    "weighted_modularity", "build_ensemble", "load_ensemble", "save_ensemble",
    "CoassociationMatrix", "CoassociationGraph", "build_coassociation",
    "build_coassociation_graph",
    "FilterConfig", "EdgeSignificance", "EcmParameters", "filter_threshold",
    "mlf_pvalues", "ecm_fit", "ecm_pvalues", "gloss_pvalues", "apply_filter",
    "filter_coassociation",
    "ConsensusState", "lower_bound_consensus", "update_community",
    "update_community_structure", "relocate_nodes", "partition_community",
    "optimize_consensus", "optimize_from_filtered", "membership_state",
    "MetricReport", "multilayer_modularity", "multilayer_silhouette", "nmi",
    "ensemble_avg_nmi", "metric_report",
    "InputError", "SolverError", "MismatchError",
]
