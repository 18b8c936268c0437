"""Inference sidecar for the plan-scorer wire protocol.

Serves /v1/propose, /v1/loglik, /v1/verify, and /v1/complete over small
local models: a seeded tiny recurrent language model for proposals,
likelihoods, and completions, and a trained feature-hashing classifier for
step verification. Model artifacts live in versioned directories with a
manifest and are plain configuration; nothing here depends on network
access or on the engine package's internals.
"""

__version__ = "0.1.0"

from .config import SidecarConfig, VerifierTrainConfig
from .server import SidecarServer, serve
from .verifier import train_verifier

__all__ = [
    "__version__",
    "SidecarConfig",
    "VerifierTrainConfig",
    "SidecarServer",
    "serve",
    "train_verifier",
]
