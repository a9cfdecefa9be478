"""Offloading only one traffic class from a congested LTE cell.

Every UE is attached to both LTE and WiFi. At 50% offload SIFM can move just
the TCP-like flows or just the UDP-like flows; PMIPv6 can only move whole
UEs. The table shows the delay of each class against the no-offload baseline.

    python demos/selective_offload.py [num_users]
"""

import sys

from sifm.experiments import ScenarioConfig, run_scenario

users = int(sys.argv[1]) if len(sys.argv) > 1 else 50
common = dict(num_users=users, mobility_mode="STATIC_DUAL", duration_s=12.0)

runs = {
    "no offload": ScenarioConfig(architecture="NO_OFFLOAD", **common),
    "SIFM, TCP only": ScenarioConfig(architecture="SIFM", offload_percent=50, policy="tcp", **common),
    "SIFM, UDP only": ScenarioConfig(architecture="SIFM", offload_percent=50, policy="udp", **common),
    "PMIPv6 (whole UEs)": ScenarioConfig(architecture="PMIPV6", offload_percent=50, **common),
}
rows = {label: run_scenario(cfg).summary for label, cfg in runs.items()}
base = rows["no offload"]

print(f"{users} users, 2 Mbps each, LTE 71 Mbps + WiFi 22 Mbps\n")
print(f"{'run':<20} {'TCP delay':>10} {'UDP delay':>10} {'TCP gain':>9} {'UDP gain':>9}")
for label, row in rows.items():
    gains = [100 * (getattr(base, c).delay_ms - getattr(row, c).delay_ms) / getattr(base, c).delay_ms
             for c in ("tcp", "udp")]
    print(f"{label:<20} {row.tcp.delay_ms:8.1f}ms {row.udp.delay_ms:8.1f}ms "
          f"{gains[0]:8.1f}% {gains[1]:8.1f}%")
