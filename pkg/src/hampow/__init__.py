"""Hamilton cycle powers in pseudorandom graphs.

Library + CLI: graph core with bit-row adjacency, pseudorandomness
checkers and spectral certifiers, the constructive embedding pipeline for
k-th powers of Hamilton cycles, counting bounds, graph generators, and
brute-force oracles.
"""

from .graph import (
    Graph,
    KPath,
    build_graph,
    common_neighborhood,
    edges_between,
    end_tuple,
    is_clique,
    start_tuple,
    verify_kpower,
)
from .pseudo import (
    ConnectednessWitness,
    PseudoParams,
    Verdict,
    Witness,
    certify_via_spectrum,
    check_jumbled,
    check_pseudorandom_exact,
    check_pseudorandom_sampled,
    connectedness_witness,
    implied_density,
    is_connected_tuple,
    low_degree_vertices,
    second_eigenvalue,
)
from .embed import (
    EmbedConfig,
    ReservoirPath,
    ReservoirSegment,
    StageFailure,
    StageReport,
    build_reservoir_graph,
    build_reservoir_path,
    bypass,
    connect,
    count_crossing_cliques,
    cover_leftover,
    embed_hamilton_power,
    expected_crossing_cliques,
    extend_step,
    good_clique_dp,
    select_reservoir_set,
)
from .counting import (
    CountAccumulator,
    CountConfig,
    brute_force_count,
    brute_force_find,
    count_lower_bound,
    extend_step_counting,
)
from .generators import (
    complete_graph,
    cycle_power,
    gnp,
    paley,
    quadratic_residues,
    subgroup_sum_graph,
    sum_closed_ordering,
)

__version__ = "0.1.0"
