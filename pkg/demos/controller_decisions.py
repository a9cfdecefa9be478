"""What the flow controller decides when a UE gains and loses networks.

One UE has a TCP-like and a UDP-like flow anchored at the PGW (LTE side).
It then attaches to WiFi, and later loses LTE coverage. For each policy we
print the FlowMods the controller pushes to the two mobility agents.

    python demos/controller_decisions.py
"""

from sifm.agent import TUNNEL_PORT
from sifm.controller import FlowController, OffloadPolicy, Role
from sifm.messages import (
    BindingUpdate, FlowKey, InstructionKind, PortStatusUpdate, Protocol, Status, parse_address,
)

PGW, WAG = 1, 2
NAMES = {PGW: "PGW", WAG: "WAG"}
REMOTE = parse_address("172.16.0.1")
LTE_IP, WIFI_IP = parse_address("10.0.0.2"), parse_address("10.1.0.2")
FLOWS = [
    (FlowKey(REMOTE, LTE_IP, 5001, 20001, Protocol.TCPLIKE), 1e6),
    (FlowKey(REMOTE, LTE_IP, 5002, 20001, Protocol.UDPLIKE), 1e6),
]


def show(mods):
    if not mods:
        print("      (no FlowMods)")
    for fm in mods:
        ins = fm.instruction
        if ins.kind is InstructionKind.TUNNEL:
            action = f"TUNNEL to {NAMES[ins.arg]}"
        elif ins.kind is InstructionKind.DECAP_FORWARD:
            action = f"DECAP and forward to port {ins.arg}"
        else:
            action = ins.kind.name
        ingress = " (from tunnel)" if fm.match.ingress_port == TUNNEL_PORT else ""
        print(f"      {NAMES[fm.ma_id]}: prio {fm.priority} {fm.match.protocol.name}{ingress} -> {action}")


def scenario(label, policy):
    print(f"\n=== policy: {label}")
    fc = FlowController(policy)
    fc.register_ma(PGW, Role.LTE, parse_address("192.168.1.1"))
    fc.register_ma(WAG, Role.WIFI, parse_address("192.168.1.2"))
    fc.handle_binding_update(BindingUpdate(1, PGW, LTE_IP, 0, 1, Status.ATTACHED), 0)
    for key, rate in FLOWS:
        fc.register_flow(1, key, rate)
    print("  t=1s  UE attaches to WiFi (BindingUpdate from the WAG)")
    ack, mods = fc.handle_binding_update(BindingUpdate(1, WAG, WIFI_IP, 0, 7, Status.ATTACHED), 1)
    show(mods)
    print("  t=8s  UE loses LTE (PortStatusUpdate DETACHED from the PGW)")
    show(fc.handle_port_status_update(PortStatusUpdate(1, PGW, 1, Status.DETACHED), 8))


scenario("no offload", OffloadPolicy.no_offload())
scenario("full offload on WiFi attach", OffloadPolicy.full())
scenario("selective, TCP only, 1 Mbps budget", OffloadPolicy.selective([Protocol.TCPLIKE], 1e6))
print("\nWhatever the policy, losing LTE moves every remaining flow onto the tunnel:"
      " existing connections keep their LTE address and survive.")
