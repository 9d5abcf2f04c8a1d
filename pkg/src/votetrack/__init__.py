"""votetrack: a single-object 3D point-cloud tracker built on seed voting.

Seed points extracted from a search region are enhanced by global and local
vector-attention blocks, vote for the target center, and a decoupled head
scores and refines box proposals. Includes a training loop, synthetic data
generation and a one-pass evaluation harness.
"""

__version__ = "0.1.0"
