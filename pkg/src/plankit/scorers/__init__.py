"""Model-scoring contracts, the deterministic mock world, and wire-protocol client/server."""

from .base import DecodingMethod, ScorerBundle, StepCandidate
from .mockworld import MockWorld, bundle_from_world, mock_likelihood, mock_propose, random_world
from .remote import RemoteScorerClient, RetryPolicy, remote_bundle
from .server import MockScorerServer

__all__ = [
    "DecodingMethod",
    "ScorerBundle",
    "StepCandidate",
    "MockWorld",
    "bundle_from_world",
    "mock_likelihood",
    "mock_propose",
    "random_world",
    "RemoteScorerClient",
    "RetryPolicy",
    "remote_bundle",
    "MockScorerServer",
]
