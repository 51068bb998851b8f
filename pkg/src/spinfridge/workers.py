import os


def worker_count(requested=None):
    """Worker threads to use: ``requested`` (default 1), capped by SPINFRIDGE_THREADS."""
    n = 1 if requested is None else int(requested)
    cap = os.environ.get("SPINFRIDGE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)
