"""Combinatorial engine for loom spaces of veering triangulations.

The package realizes the bifoliated plane induced on the universal cover
of a veering triangulation, the deck-group action on it, the constructive
rectangle lemmas (intersection trichotomy, tetrahedron building, closing
pairs), element/stabilizer classification, and a desk-scale cell model of
the quotient of the pair space by the group.
"""

from .errors import (
    DepthExceeded,
    EmptySaturation,
    IdentityElement,
    LengthMismatch,
    LoomError,
    NoOrientation,
    NotCommuting,
    NotDiagonal,
    ObstructionAtDepth,
    PatchSyntaxError,
    RegionNotExpanded,
    ResourceLimit,
    TooClose,
    TriangulationSyntaxError,
    WindowNotFundamental,
)
from .veering import (
    VeeringCertificate,
    VeeringTriangulation,
    Violation,
    parse_gluing_table,
    parse_taut_isosig,
    parse_triangulation,
    validate_veering,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
