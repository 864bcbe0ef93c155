"""HTTP service (FastAPI) for submitting runs and fetching summaries."""
