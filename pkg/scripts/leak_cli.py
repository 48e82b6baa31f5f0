#!/usr/bin/env python3
"""
Acoustic leak detector command line.
Runs the synth/features/select/train/detect/report pipeline steps.
"""

import sys
import os

# Add project root to path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from detection.cli import main


if __name__ == "__main__":
    sys.exit(main())
