"""Data models shared by every stage of the shape pipeline."""
