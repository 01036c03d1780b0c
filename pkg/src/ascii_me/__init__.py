"""Quality-diversity neuroevolution with performance-weighted variation.

The package evolves an archive of deterministic MLP policies over a
centroidal tessellation of a behaviour-descriptor space.  Two variation
operators drive the search: directional genetic interpolation between
elites, and a gradient-based operator that pulls a parent's action
sequence toward a recorded target sequence with per-time-step weights
built from return gaps, state comparability, and action distance.

Typical use::

    from ascii_me import RunConfig, run

    result = run(RunConfig(env_name="point_trap_omni", seed=1,
                           total_evaluations=50_000, batch_size=256))
    print(result.archive.metrics())

The ``ascii-me`` command line exposes the same loop plus sweeps,
ablations, and CSV reporting.
"""

from .archive import (
    AdditionOutcome,
    Archive,
    ArchiveMetrics,
    cell_index,
    centroid_cache_path,
    generate_centroids,
    load_archive,
    load_or_generate_centroids,
    save_archive,
)
from .bench import (
    EfficiencyTable,
    ReportSummary,
    SweepResult,
    SweepSpec,
    efficiency_scores,
    quartile_summary,
    report,
    run_sweep,
)
from .buffer import TrajectoryBuffer
from .envs import (
    ENVIRONMENTS,
    BatchRollouts,
    EnvSpec,
    Rollout,
    make_env,
    rollout,
    rollout_batch,
)
from .policy import (
    PolicySpec,
    forward,
    forward_pop,
    forward_pop_states,
    forward_states,
    forward_vjp_pop_states,
    genotype_from_bytes,
    genotype_from_json,
    genotype_to_bytes,
    genotype_to_json,
    init_genotype,
    spec_digest,
    vjp,
    vjp_pop_states,
    vjp_states,
)
from .scheduler import IterationReport, RunConfig, RunResult, run
from .seeding import as_generator, stream
from .variation import (
    AsciiConfig,
    AsciiResult,
    IsoLineConfig,
    ascii_mutate,
    ascii_mutate_batch,
    isoline_dd,
    rewards_to_go,
    weight_vector,
)

__version__ = "0.1.0"

__all__ = [
    "AdditionOutcome",
    "Archive",
    "ArchiveMetrics",
    "AsciiConfig",
    "AsciiResult",
    "BatchRollouts",
    "ENVIRONMENTS",
    "EfficiencyTable",
    "EnvSpec",
    "IsoLineConfig",
    "IterationReport",
    "PolicySpec",
    "ReportSummary",
    "Rollout",
    "RunConfig",
    "RunResult",
    "SweepResult",
    "SweepSpec",
    "TrajectoryBuffer",
    "as_generator",
    "ascii_mutate",
    "ascii_mutate_batch",
    "cell_index",
    "centroid_cache_path",
    "efficiency_scores",
    "forward",
    "forward_pop",
    "forward_pop_states",
    "forward_states",
    "forward_vjp_pop_states",
    "generate_centroids",
    "genotype_from_bytes",
    "genotype_from_json",
    "genotype_to_bytes",
    "genotype_to_json",
    "init_genotype",
    "isoline_dd",
    "load_archive",
    "load_or_generate_centroids",
    "make_env",
    "quartile_summary",
    "report",
    "rewards_to_go",
    "rollout",
    "rollout_batch",
    "run",
    "run_sweep",
    "save_archive",
    "spec_digest",
    "stream",
    "vjp",
    "vjp_pop_states",
    "vjp_states",
    "weight_vector",
]
