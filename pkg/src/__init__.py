# Energy Efficient Ethernet link policy simulator
