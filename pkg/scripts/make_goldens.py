#!/usr/bin/env python3
"""Regenerate the golden wire vectors under tests/goldens/.

Only needed after a deliberate wire-format change; the vectors are checked
in and the test suite pins their exact bytes.
"""

import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from nscsl.goldens import emit_goldens

if __name__ == "__main__":
    for path in emit_goldens(ROOT / "tests" / "goldens"):
        print(f"wrote {path}")
