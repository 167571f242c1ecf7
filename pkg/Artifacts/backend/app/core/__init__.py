"""
Core module containing settings, exceptions, and logging setup.
"""
