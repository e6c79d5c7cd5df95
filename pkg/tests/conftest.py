import sys
from pathlib import Path

# make tests/helpers.py and tests/fixtures importable regardless of rootdir
sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
