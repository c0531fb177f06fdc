__version__ = "0.1.0"

from ssmfusion.ops.open import from_file, from_string
from ssmfusion.ops.pipeline import run_pipeline

__all__ = [
    "from_file",
    "from_string",
    "run_pipeline",
    "__version__",
]
