# momask Models
from .motion import (
    JointLayout, MotionSequence, LatentSequence, DatasetSplit,
    default_layout, synth_layout, AXES,
)
from .rvq import RvqConfig, Codebook, CodebookStack, TokenGrid, EncodeTrace
from .generation import (
    MASK, NULL_CONDITION, ConditionRef, DecodeConfig, DecodeState, DecodeTrace,
    MaskSchedule, SamplingMode, PredictorSettings, RRemaskConfig, ResidualContext,
)
from .report import JerkSeries, SjpeReport, MetricReport, IntervalValue
from .run import RunConfig, RunManifest, RvqSettings, PathsConfig

__all__ = [
    # Motion
    "JointLayout",
    "MotionSequence",
    "LatentSequence",
    "DatasetSplit",
    "default_layout",
    "synth_layout",
    "AXES",
    # RVQ
    "RvqConfig",
    "Codebook",
    "CodebookStack",
    "TokenGrid",
    "EncodeTrace",
    # Generation
    "MASK",
    "NULL_CONDITION",
    "ConditionRef",
    "DecodeConfig",
    "DecodeState",
    "DecodeTrace",
    "MaskSchedule",
    "SamplingMode",
    "PredictorSettings",
    "RRemaskConfig",
    "ResidualContext",
    # Evaluation
    "JerkSeries",
    "SjpeReport",
    "MetricReport",
    "IntervalValue",
    # Run
    "RunConfig",
    "RunManifest",
    "RvqSettings",
    "PathsConfig",
]
