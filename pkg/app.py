"""
Leverage Regulation Simulator

Agent-based market of leveraged value investors under three credit
regulation schemes (unregulated cap, Basle haircuts and spreads, perfect
option hedging). This is the main entry point for the command line tool.
"""

import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
