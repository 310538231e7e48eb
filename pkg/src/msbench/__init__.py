"""Mini Schur complement preconditioners for saddle-point systems."""
