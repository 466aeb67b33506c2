"""
config package

Handles run configuration: pydantic settings per stage, key=value config files
with section headers, and environment overrides read during start up.
"""
