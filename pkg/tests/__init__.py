"""Test suite package for the AsyncMEL staleness allocator."""
