"""mmforge: data engineering and evaluation tooling for grounded
video-language pipelines.

Core pieces: the compact point/track answer format, frame/crop token-geometry
planning, message trees with packed attention masks, budget-optimal sequence
packing, loss-token weighting, grounded-video metrics (counting, point F1,
HOTA, caption F1, Bradley-Terry Elo), and data-curation filters. An HTTP
service (mmforge.service) exposes everything; the CLI (mmforge.cli) is a thin
client over it.
"""

__version__ = "0.1.0"
