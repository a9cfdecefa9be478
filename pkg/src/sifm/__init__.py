"""Flow-mobility simulator: an SDN-style Flow Controller with Mobility Agents,
a Proxy Mobile IPv6 baseline, and a discrete-event LTE/WiFi network model."""

__version__ = "0.1.0"
