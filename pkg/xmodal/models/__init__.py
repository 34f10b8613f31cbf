"""
Single-stream embedding network, losses and training
"""
