"""Multi-objective fuzzing scheduler: bandit-selected objective combinations,
an objective-aware power schedule and an in-loop NSGA-II optimizer."""

from .engine import Campaign, CampaignConfig, run_campaign
from .kernels import BACKEND
from .nic import NicConfig
from .simtarget import load_target_spec

__all__ = ["BACKEND", "Campaign", "CampaignConfig", "NicConfig", "load_target_spec",
           "run_campaign"]
__version__ = "0.1.0"
