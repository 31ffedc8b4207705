"""HU-based foreground masking for 3D masked image modeling on CT volumes."""
from .errors import (
    DegenerateRatioError,
    DimensionError,
    DivergenceError,
    DivisibilityError,
    EmptyInput,
    HumaskError,
    InsufficientPairs,
    IoError,
    NoForegroundError,
    NoSeparation,
    ParseError,
    ShapeError,
    SpecError,
    UnitError,
    UnsupportedDatatype,
)
from .intensity import DEFAULT_WINDOW, Histogram, WindowSpec, histogram, normalize
from .kernels import BACKEND
from .masking import (
    MaskPlan,
    Strategy,
    apply_mask,
    build_mask_plan,
    characterize,
    classify_foreground,
    masked_indices,
)
from .nifti import read_nifti, write_nifti
from .partition import GridPlan, extract, pad_to_divisible, plan_grid, reassemble
from .phantom import PhantomSpec, generate_phantom
from .volume import Unit, Volume3D

__version__ = "0.1.0"
