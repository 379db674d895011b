#!/usr/bin/env python3
"""
CLI Tool for subspace-mapper

This is a wrapper script that imports from the subspace_mapper package.
"""

import sys
from subspace_mapper.cli import main

if __name__ == "__main__":
    sys.exit(main())
