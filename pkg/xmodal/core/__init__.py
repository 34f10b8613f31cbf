"""
Configuration, errors and domain services for xmodal
"""
