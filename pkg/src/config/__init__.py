# Configuration package for eeesim
