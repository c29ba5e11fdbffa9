"""Joint phase-noise tracking, equalization and decoding by message passing."""
from .channel import PROAKIS_C, ChannelSpec, simulate_frame
from .harness import RunConfig, run_experiment, summarize
from .receiver import bpmfep_receive, eks_receive, known_pn_receive, receive
from .tx import FrameFormat, FrameLayout

__version__ = "0.1.0"
