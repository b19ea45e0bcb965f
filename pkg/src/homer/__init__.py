"""Multi-view object removal: interactive masks, homography propagation, inpainting."""

from .errors import HomerError
from .geometry import Correspondence, Homography, RansacConfig, RansacResult
from .mask import ShapeContextConfig
from .oracles import (
    InpainterInterface,
    MatcherInterface,
    MatchResult,
    OracleSet,
    SegmenterInterface,
)
from .pipeline import PipelineConfig, PropagationResult, ViewSet
from .prompts import InteractionResult, PromptSet
from .refine import AnchorConfig, RefineOutcome
from .scenegen import ObjectSpec, SceneSpec, SyntheticScene

__version__ = "0.1.0"

__all__ = [
    "AnchorConfig",
    "Correspondence",
    "Homography",
    "HomerError",
    "InpainterInterface",
    "InteractionResult",
    "MatchResult",
    "MatcherInterface",
    "ObjectSpec",
    "OracleSet",
    "PipelineConfig",
    "PromptSet",
    "PropagationResult",
    "RansacConfig",
    "RansacResult",
    "RefineOutcome",
    "SceneSpec",
    "SegmenterInterface",
    "ShapeContextConfig",
    "SyntheticScene",
    "ViewSet",
]
