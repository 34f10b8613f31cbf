"""
Pydantic schemas for xmodal domain types and configuration
"""
