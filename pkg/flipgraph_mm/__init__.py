"""flipgraph-mm - Matrix multiplication schemes: verify, search, morph and lift."""

from .config import SearchConfig, ToolkitConfig, create_default_config, load_config
from .core import (
    GF2,
    INTEGER,
    Format,
    FormatMismatchError,
    GF2Matrix,
    IntMatrix,
    Ring,
    RingMismatchError,
    Scheme,
    SchemeError,
    Term,
    apply_scheme,
    mod2k,
    normalize,
    rank,
    standard_scheme,
    to_ring,
    verify,
)
from .lift import LiftFailure, LiftResult, hensel_step, lift, reconstruct_integers
from .moves import (
    FlipMove,
    MoveError,
    ReductionMove,
    SplitMove,
    enumerate_flips,
    find_reductions,
    flip,
    reduce,
    split,
)
from .morph import (
    MorphError,
    canonical_format,
    extend,
    extend_by_standard,
    restrict,
    rotate,
    transpose,
)
from .pipeline import load_plan, run_pipeline
from .schemeio import (
    SchemeParseError,
    import_published,
    load_scheme,
    parse,
    save_scheme,
    serialize,
)
from .search import RunState, SearchError, orchestrate, walk

__version__ = "0.1.0"
__all__ = [
    # Core types
    "Format",
    "Ring",
    "GF2",
    "INTEGER",
    "mod2k",
    "GF2Matrix",
    "IntMatrix",
    "Term",
    "Scheme",
    # Core operations
    "standard_scheme",
    "verify",
    "rank",
    "normalize",
    "apply_scheme",
    "to_ring",
    # Moves
    "FlipMove",
    "ReductionMove",
    "SplitMove",
    "flip",
    "reduce",
    "split",
    "find_reductions",
    "enumerate_flips",
    # Morphs
    "extend",
    "extend_by_standard",
    "restrict",
    "rotate",
    "transpose",
    "canonical_format",
    # Search
    "RunState",
    "walk",
    "orchestrate",
    "run_pipeline",
    "load_plan",
    # Lifting
    "LiftResult",
    "hensel_step",
    "reconstruct_integers",
    "lift",
    # I/O
    "serialize",
    "parse",
    "load_scheme",
    "save_scheme",
    "import_published",
    # Config
    "SearchConfig",
    "ToolkitConfig",
    "load_config",
    "create_default_config",
    # Errors
    "SchemeError",
    "FormatMismatchError",
    "RingMismatchError",
    "MoveError",
    "MorphError",
    "SearchError",
    "LiftFailure",
    "SchemeParseError",
]
