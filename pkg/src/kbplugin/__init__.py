"""Knowledge-base program induction engine.

Core pieces: an immutable triple-store KB, a KoPL program executor, a
constrained beam-search decoder over pluggable scorers, alias-replacement
KB augmentation, and schema training-data generation. A FastAPI service
wraps the engine; the CLI is a thin client of that service.
"""

__version__ = "0.1.0"

from .errors import KBPluginError  # noqa: F401
from .kb import KnowledgeBase, load_kb  # noqa: F401
from .kopl import Program, execute, parse_program  # noqa: F401
