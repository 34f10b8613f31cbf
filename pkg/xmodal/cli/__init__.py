"""
Subcommands of the xmodal command-line harness
"""
