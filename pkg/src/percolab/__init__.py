"""Critical percolation laboratory: bond and Gaussian level-set models."""
