"""Session-based new-item recommendation.

Encodes a user's session as a directed item graph, learns dual intent
representations (soft attention and Beta-distribution attention), infers
embeddings for never-interacted items from their attributes, and ranks
candidate new items for the session.
"""

__version__ = "0.1.0"
