import sys
from pathlib import Path

# allow running the tests without installing the package
_src = Path(__file__).parent / "src"
if str(_src) not in sys.path:
    sys.path.insert(0, str(_src))
