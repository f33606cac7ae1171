"""Work-heat statistics and efficiency large deviations of quantum Otto engines."""

__version__ = "0.1.0"

from .engines import (  # noqa: E402
    BathPair,
    HarmonicEngine,
    ScaleInvariantEngine,
    TwoLevelEngine,
    macroscopic_efficiencies,
    thermal_weights,
    tls_no_transition_prob,
)
from .joint import (  # noqa: E402
    JointDistribution,
    build_joint,
    build_joint_adiabatic_scale_invariant,
    build_joint_harmonic,
    build_joint_two_level,
    harmonic_transitions,
    moments,
)
from .cgf import (  # noqa: E402
    Undefined,
    cgf_from_distribution,
    cgf_harmonic,
    cgf_harmonic_linear,
    cgf_scale_invariant,
    cgf_two_level,
    cgf_two_level_linear,
    make_cgf,
)
from .ldf import (  # noqa: E402
    SearchConfig,
    contour_grid,
    contraction_rate,
    degeneracy_check,
    legendre_2d,
    legendre_point,
    rate_curve,
    rate_function,
)
from .montecarlo import empirical_rate, sample_blocks, sample_cycle  # noqa: E402
