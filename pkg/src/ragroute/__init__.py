"""Multi-agent retrieval-augmented QA.

Each agent owns a chunked corpus and answers questions over it; a router
summarizes every agent's knowledge as cluster centroids and sends each query
to the handful of agents most likely to know; a planner resolves multi-hop
questions by iteratively splitting them into routable subquestions.
"""

__version__ = "0.1.0"
