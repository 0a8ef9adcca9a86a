import sys
from pathlib import Path

# allow cross-module imports of shared test helpers (test_linkstream fixtures)
sys.path.insert(0, str(Path(__file__).parent))
