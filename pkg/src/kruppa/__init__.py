"""Two-view relative pose from five calibrated correspondences."""
