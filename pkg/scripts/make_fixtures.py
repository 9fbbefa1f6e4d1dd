"""Regenerate the bundled fixtures under src/retirement_eval/data."""

import os
import sys

from retirement_eval.fixtures import write_all

if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "src", "retirement_eval", "data")
    for path in write_all(target):
        print(path)
