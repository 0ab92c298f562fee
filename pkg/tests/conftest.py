import sys
from pathlib import Path

# make tests/dense_reference.py importable from the test modules
sys.path.insert(0, str(Path(__file__).parent))
