# This file makes the 'app' directory a Python package.
