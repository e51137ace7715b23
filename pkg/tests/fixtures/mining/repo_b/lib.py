def rejected():
    """Never mined because the repository is too small."""
    return None
