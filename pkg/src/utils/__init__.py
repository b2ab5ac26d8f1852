# Helper utilities for eeesim
