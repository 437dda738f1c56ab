"""Entry point for the experiment runner.

Usage:
    python scripts/run_experiment.py run experiments/constant_indicator.toml
    python scripts/run_experiment.py theta "const(1)" --exponent log
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from interfaces.cli import main

if __name__ == "__main__":
    sys.exit(main())
