"""
utils

Helpers shared across the project:
- Logging setup
- Seeding and input validation
- File and tensor container I/O
"""
