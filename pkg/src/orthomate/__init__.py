"""Orthogonal mates for Latin rectangles via a guided random greedy process."""

from .core import (
    IndexOutOfRange,
    LatinRectangle,
    LineId,
    NotLatin,
    NotOrthogonal,
    OrthomateError,
    ParseError,
    PartialTransversal,
    Point,
    Shape,
    ShapeMismatch,
    VerifyReport,
    extract_transversals,
    line_members,
    parse_rectangle,
    verify_latin,
    verify_orthogonal,
)
from .matching import (
    BirkhoffDecomposition,
    DeadSymbol,
    FractionalMatching,
    Infeasible,
    NoSupportMatching,
    RowDistribution,
    TooLarge,
    birkhoff_decompose,
    build_fractional_matching,
    cut_check_bruteforce,
    normalize_row,
    sample_matching,
    sample_matching_lazy,
)
from .process import (
    DegenerateDenominator,
    GammaReport,
    GammaViolation,
    GuidanceState,
    KillMask,
    ProcessConfig,
    ProcessOutcome,
    RowAlreadyColoured,
    advance_state,
    central_projections,
    check_gamma,
    init_state,
    kill_mask,
    run_process,
)
from .baselines import (
    LegalityGraph,
    LimitExceeded,
    NoPerfectMatching,
    backtrack_mate,
    build_legality_graph,
    hall_greedy,
    random_latin_rectangle,
)
from .diagnostics import (
    EmptyTrajectory,
    StepRecord,
    SummaryReport,
    TrajectoryRecorder,
    TrajectoryStats,
    record_step,
    summarize,
)

__version__ = "0.1.0"
