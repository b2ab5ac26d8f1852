# Command modules for eeesim
