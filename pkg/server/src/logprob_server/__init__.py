from .app import create_app
from .config import Settings
from .engine import CausalScorer, SentenceEmbedder

__version__ = "0.1.0"
__all__ = ["CausalScorer", "SentenceEmbedder", "Settings", "create_app"]
