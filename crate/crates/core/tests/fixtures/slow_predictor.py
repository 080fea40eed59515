#!/usr/bin/env python3
"""Never answers in time; exercises the request timeout."""
import sys
import time

for _ in sys.stdin:
    time.sleep(60)
