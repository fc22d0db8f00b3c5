"""Central-force motion and closed orbits on (pseudo-)Riemannian surfaces of
revolution: the Bertrand family, apsidal angles, the Maupertuis transform
and equator decompositions."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BertrandLabError,
    ConfigError,
    DomainError,
    InvalidFunctionError,
    InvalidIntervalError,
    InvalidSurfaceError,
    NoDomainError,
    PreconditionError,
    UnboundedOrbitError,
)
from .surface import (  # noqa: F401
    BertrandFamily,
    SurfaceOfRevolution,
    TangentClass,
    TanneryMetric,
    bertrand_belt,
    bertrand_surface,
    classify_regime,
    de_sitter,
    equators,
    flat_plane,
    multi_equator,
    round_sphere,
    tannery_surface,
)
from .dynamics import (  # noqa: F401
    CentralPotential,
    PhaseState,
    circular_orbits,
    constant_potential,
    effective_potential,
    energy,
    integrate,
    kepler,
    oscillator,
    power_law_potential,
)
from .closure import apsidal_angle, closure_report, detect_rational, scan_closing  # noqa: F401
from .maupertuis import falsify_completely_bertrand, maupertuis_metric, trajectory_geodesic_match  # noqa: F401
from .decompose import cap_structure, census_stable_orbits, split_at_equators  # noqa: F401
