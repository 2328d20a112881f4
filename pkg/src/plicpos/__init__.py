"""Volume-conserving plane positioning in arbitrary polyhedra."""
from .polytope import (
    DegenerateFace,
    IndexOutOfRange,
    NonPlanarFace,
    OpenSurface,
    Polyhedron,
    PolyhedronError,
    build,
    total_volume,
    transformed,
)
from .positioning import (
    NoProgress,
    NoSignChange,
    PositionQuery,
    PositionResult,
    Status,
    Step,
    initial_guess,
    position,
    position_newton_baseline,
)
from .shapes import SHAPES, CuboidSpec, ParseError, TorusSpec, load_off, load_shape, save_off
from .truncation import (
    LocalCubic,
    PlaneFrame,
    StaticCoefficients,
    VolumeSample,
    local_cubic,
    precompute,
    truncated_volume,
)

__all__ = [name for name in dir() if not name.startswith("_")]
