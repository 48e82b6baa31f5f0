"""Put the repository root on sys.path so the top-level packages import in tests."""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

collect_ignore = ['examples']
