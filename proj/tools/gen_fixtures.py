#!/usr/bin/env python3
"""Regenerates the fixture maps and scenario suites under data/.

Output is deterministic; rerun after editing a layout and commit the result.
"""

import json
import random
from pathlib import Path

import networkx as nx

ROOT = Path(__file__).resolve().parent.parent
MAPS = ROOT / "data" / "maps"
SCEN = ROOT / "data" / "scenarios"

HAZARDS = ["wet_floor_sign", "warning_tape", "barrier", "broken_glass"]
BENIGN = ["chair", "pot", "poster", "trash_can"]


class Layout:
    def __init__(self, name):
        self.name = name
        self.nodes = {}
        self.edges = {}

    def node(self, nid, x, y, tags=(), label=None):
        self.nodes[nid] = (x, y, list(tags), label)

    def link(self, a, b, tags=()):
        ax, ay = self.nodes[a][:2]
        bx, by = self.nodes[b][:2]
        assert ax == bx or ay == by, (a, b)
        for f, t in ((a, b), (b, a)):
            fx, fy = self.nodes[f][:2]
            tx, ty = self.nodes[t][:2]
            if tx > fx:
                d = 0
            elif ty > fy:
                d = 90
            elif tx < fx:
                d = 180
            else:
                d = 270
            dist = abs(tx - fx) + abs(ty - fy)
            self.edges[(f, t)] = (dist, d, list(tags))

    def text(self):
        out = ["MAP v1"]
        for nid in sorted(self.nodes):
            x, y, tags, label = self.nodes[nid]
            line = f"NODE {nid} {x} {y}"
            for t in tags:
                line += f" tag={t}"
            if label:
                line += f' label="{label}"'
            out.append(line)
        for (f, t) in sorted(self.edges):
            dist, d, tags = self.edges[(f, t)]
            line = f"EDGE {f} {t} dist={dist} dir={d}"
            for tag in tags:
                line += f" tag={tag}"
            out.append(line)
        return "\n".join(out) + "\n"

    def graph(self, avoid=()):
        g = nx.DiGraph()
        for nid, (_, _, tags, _) in self.nodes.items():
            if not set(tags) & set(avoid):
                g.add_node(nid)
        for (f, t), (dist, _, tags) in self.edges.items():
            if f in g and t in g and not set(tags) & set(avoid):
                g.add_edge(f, t, weight=dist)
        return g

    def unique_shortest(self, s, t, avoid=()):
        g = self.graph(avoid)
        try:
            paths = list(nx.all_shortest_paths(g, s, t, weight="weight"))
        except nx.NetworkXNoPath:
            return None
        return paths[0] if len(paths) == 1 else None

    def phrase(self, nid):
        label = self.nodes[nid][3]
        return label if label else nid


def rectangle():
    m = Layout("rectangle")
    m.node("A", 0, 0)
    m.node("B", 4, 0)
    m.node("C", 4, 3)
    m.node("D", 0, 3)
    m.link("A", "B")
    m.link("B", "C")
    m.link("C", "D")
    m.link("D", "A")
    return m


def house():
    m = Layout("house")
    m.node("ENT", 0, 0, ["entrance"], "front door")
    m.node("HALL", 4, 0, ["hallway"])
    m.node("KIT", 8, 0, ["kitchen"], "kitchen")
    m.node("LIV", 4, 5, ["living_room"], "living room")
    m.node("SOFA", 0, 5, [], "sofa")
    m.node("DIN", 8, 5, ["dining"], "dining room")
    m.node("BATH", 8, -3, [], "bathroom")
    m.node("STAIRS", 4, -3, ["stairs"], "staircase")
    m.node("BED", 4, -7, [], "bedroom")
    m.node("STUDY", 0, -3, [], "study")
    m.node("CLO", 0, -7, [], "closet")
    for a, b in [("ENT", "HALL"), ("HALL", "KIT"), ("HALL", "LIV"), ("LIV", "SOFA"), ("LIV", "DIN"),
                 ("KIT", "DIN"), ("KIT", "BATH"), ("HALL", "STAIRS"), ("STAIRS", "BED"), ("STAIRS", "STUDY"),
                 ("ENT", "STUDY"), ("BATH", "STAIRS"), ("STUDY", "CLO"), ("CLO", "BED"), ("SOFA", "ENT")]:
        m.link(a, b)
    return m


def office():
    m = Layout("office")
    for i in range(5):
        m.node(f"A{i}", 10 * i, 0, ["corridor"])
        m.node(f"B{i}", 10 * i, 10, ["corridor"])
    m.nodes["B2"] = (20, 10, ["corridor", "noisy"], "cafeteria corridor")
    m.node("M0", 0, 5)
    m.node("M2", 20, 5)
    m.node("S", 40, 5, ["stairs"], "stairwell")
    m.node("O1", 10, -4, ["office"], "office 101")
    m.node("O2", 30, -4, ["office"], "office 102")
    m.node("O3", 10, 14, ["office"], "office 201")
    m.node("O4", 30, 14, ["office"], "office 202")
    m.node("E", 20, -4, ["elevator"], "elevator")
    m.node("K", 20, 14, ["kitchen", "noisy"], "kitchen")
    m.node("R", 0, 14, ["meeting"], "meeting room")
    m.node("W", -4, 0, ["restroom"], "restroom")
    m.node("L", 0, -4, ["lobby"], "lobby")
    m.node("P", 40, 14, [], "printer room")
    m.node("Q", -4, 10, [], "reception")
    for i in range(4):
        m.link(f"A{i}", f"A{i + 1}")
        m.link(f"B{i}", f"B{i + 1}")
    for a, b in [("A0", "M0"), ("M0", "B0"), ("A2", "M2"), ("M2", "B2"), ("A4", "S"), ("S", "B4"),
                 ("A1", "O1"), ("A3", "O2"), ("B1", "O3"), ("B3", "O4"), ("A2", "E"), ("B2", "K"),
                 ("B0", "R"), ("A0", "W"), ("A0", "L"), ("B4", "P"), ("B0", "Q")]:
        m.link(a, b)
    return m


def mall():
    m = Layout("mall")
    m.node("ENTRY", 0, 0, ["entrance"], "mall entrance")
    m.node("ESC", 5, 0, ["stairs"], "escalator")
    m.node("FOOD", 10, 0, [], "food court")
    m.node("W1", 0, 12, ["corridor"])
    m.node("W2", 10, 12, ["corridor"])
    m.node("SHOE", -4, 12, ["shop"], "shoe store")
    m.node("BOOK", 14, 12, ["shop"], "bookstore")
    m.node("ATM", 10, -4, [], "cash machine")
    for a, b in [("ENTRY", "ESC"), ("ESC", "FOOD"), ("ENTRY", "W1"), ("W1", "W2"), ("W2", "FOOD"),
                 ("W1", "SHOE"), ("W2", "BOOK"), ("FOOD", "ATM")]:
        m.link(a, b)
    return m


def bridge():
    m = Layout("bridge")
    m.node("N0", 0, 0, [], "north bank")
    m.node("N1", 6, 0)
    m.node("N2", 12, 0)
    m.node("N3", 18, 0, [], "south bank")
    for a, b in [("N0", "N1"), ("N1", "N2"), ("N2", "N3")]:
        m.link(a, b)
    return m


def write_json(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")


def scenario(name, layout, start, script, heading=0, **extra):
    doc = {
        "name": name,
        "map": f"../../maps/{layout.name}.map",
        "store": "generate",
        "start": {"node": start, "heading": heading},
        "script": [{"utterance": u, "at_event": 1} if isinstance(u, str) else u for u in script],
        "gateway": "mock",
    }
    doc.update(extra)
    return doc


def first_edge_direction(layout, path):
    return layout.edges[(path[0], path[1])][1]


def navigation(layouts, rng):
    for layout in layouts:
        ids = sorted(layout.nodes)
        pairs = set()
        while len(pairs) < 20:
            s, t = rng.sample(ids, 2)
            if layout.nodes[t][3] is None or (s, t) in pairs:
                continue
            pairs.add((s, t))
        for i, (s, t) in enumerate(sorted(pairs)):
            name = f"{layout.name}_nav_{i + 1:02d}"
            doc = scenario(name, layout, s, [f"take me to the {layout.phrase(t)}"],
                           heading=rng.choice([0, 90, 180, 270]),
                           expected={"goal_node": t, "success": True})
            write_json(SCEN / "navigation" / f"{name}.json", doc)


def kidnap_targets(layout, rng, count, min_legs=2):
    ids = sorted(layout.nodes)
    out = []
    seen = set()
    while len(out) < count:
        s, t = rng.sample(ids, 2)
        path = layout.unique_shortest(s, t)
        if path is None or len(path) - 1 < min_legs or (s, t) in seen or layout.nodes[t][3] is None:
            continue
        seen.add((s, t))
        expected_at = path[1]
        while True:
            to = rng.choice(ids)
            h = rng.choice([0, 90, 180, 270])
            if to != expected_at:
                break
        out.append((s, t, path, to, h))
    return out


def kidnap(layouts, rng):
    cases = []
    for layout in layouts:
        cases += [(layout, c) for c in kidnap_targets(layout, rng, 10)]
    for i, (layout, (s, t, path, to, h)) in enumerate(cases):
        heading = first_edge_direction(layout, path)
        base = dict(faults=[{"type": "kidnap", "trigger_leg": 1, "teleport_to": to, "heading": h}],
                    expected={"goal_node": t, "success": True, "should_detect_kidnap": True,
                              "should_recover": True})
        name = f"kidnap_{layout.name}_{i + 1:02d}"
        write_json(SCEN / "kidnap" / f"{name}.json",
                   scenario(name, layout, s, [f"take me to the {layout.phrase(t)}"], heading=heading, **base))
        noisy = json.loads(json.dumps(base))
        noisy["faults"].append({"type": "noise", "sigma": 0.1})
        name = f"kidnap_noisy_{layout.name}_{i + 1:02d}"
        write_json(SCEN / "kidnap_noisy" / f"{name}.json",
                   scenario(name, layout, s, [f"take me to the {layout.phrase(t)}"], heading=heading, **noisy))

    office_map = next(layout for layout in layouts if layout.name == "office")
    # B1 looks exactly like A1: a teleport from A1 to B1 goes unnoticed
    doc = scenario("kidnap_aliased_office", office_map, "A0", ["take me to A1"], heading=0,
                   faults=[{"type": "kidnap", "trigger_leg": 1, "teleport_to": "B1", "heading": 0}],
                   appearance={"B1": "A1"},
                   expected={"should_detect_kidnap": False, "should_recover": False, "success": False,
                             "final_reason": "arrived_at_wrong_node"})
    write_json(SCEN / "kidnap_aliased" / "kidnap_aliased_office.json", doc)


def hazard(layouts, rng):
    cases = []
    for layout in layouts:
        ids = sorted(layout.nodes)
        per = 15 if layout.name != "bridge" else 0
        seen = set()
        while len([c for c in cases if c[0] is layout]) < per:
            s, t = rng.sample(ids, 2)
            path = layout.unique_shortest(s, t)
            if path is None or (s, t) in seen or layout.nodes[t][3] is None:
                continue
            g = layout.graph()
            g.remove_edges_from([(path[0], path[1]), (path[1], path[0])])
            if not nx.has_path(g, s, t):
                continue
            seen.add((s, t))
            cases.append((layout, s, t, path))
    bridge_map = next(layout for layout in layouts if layout.name == "bridge")
    rows = []
    for truth in (True, False):
        for i, (layout, s, t, path) in enumerate(cases):
            label = rng.choice(HAZARDS if truth else BENIGN)
            rows.append((truth, layout, s, t, path, label, i))
    for truth, layout, s, t, path, label, i in rows:
        edge = [path[0], path[1]]
        kind = "hazard" if truth else "benign"
        name = f"{kind}_{layout.name}_{i + 1:02d}"
        for suite, extra in (("hazard", {}),
                             ("hazard_confusion", {"confusion": {"false_positive": 1 / 3,
                                                                 "false_negative": 1 / 6}})):
            exp = {"hazard_ground_truth": truth, "goal_node": t}
            if not extra:
                exp["success"] = True
            doc = scenario(name, layout, s, [f"take me to the {layout.phrase(t)}"],
                           heading=first_edge_direction(layout, path),
                           objects=[{"label": label, "edge": edge, "hazard": truth}],
                           expected=exp, **extra)
            write_json(SCEN / suite / f"{name}.json", doc)
    # no alternative exists on the bridge: the user must proceed
    doc = scenario("hazard_bridge_no_alternative", bridge_map, "N0", ["take me to the south bank"], heading=0,
                   objects=[{"label": "wet_floor_sign", "edge": ["N1", "N2"], "hazard": True}],
                   expected={"goal_node": "N3", "success": True})
    write_json(SCEN / "hazard_extra" / "hazard_bridge_no_alternative.json", doc)


def clamp(v):
    return min(2.0, max(0.3, v))


def personalization(by_name):
    house_map, office_map, mall_map = by_name["house"], by_name["office"], by_name["mall"]
    docs = []
    docs.append(scenario("pref_house_avoid_stairs", house_map, "HALL", ["avoid stairs", "take me to the bedroom"],
                         expected={"goal_node": "BED", "success": True}))
    docs.append(scenario("pref_office_avoid_stairs", office_map, "A4", ["avoid the stairs", "take me to the printer room"],
                         expected={"goal_node": "P", "success": True}))
    docs.append(scenario("pref_mall_avoid_escalator", mall_map, "ENTRY", ["avoid stairs", "take me to the food court"],
                         expected={"goal_node": "FOOD", "success": True}))
    docs.append(scenario("pref_office_avoid_noisy", office_map, "B0", ["avoid noisy areas", "take me to office 202"],
                         expected={"goal_node": "O4", "success": True}))
    docs.append(scenario("pref_office_midroute_avoid", office_map, "A0",
                         ["take me to the printer room", {"utterance": "avoid stairs", "at_event": 4}],
                         expected={"goal_node": "P", "success": True}))

    speeds = [
        ("pref_speed_faster", ["go faster", "go faster", "go faster", "take me to the kitchen"], house_map, "ENT", "KIT"),
        ("pref_speed_slower", ["slow down", "slow down", "slow down", "slow down", "slow down", "slow down",
                               "take me to the sofa"], house_map, "KIT", "SOFA"),
        ("pref_speed_mixed", ["set speed to 1.9", "go faster", "slow down", "speed up", "take me to the elevator"],
         office_map, "A0", "E"),
        ("pref_speed_clamp_low", ["set speed to 0.1", "go faster", "take me to the lobby"], office_map, "A2", "L"),
        ("pref_mall_avoid_and_slow", ["avoid stairs", "slow down", "take me to the food court"], mall_map, "ENTRY", "FOOD"),
    ]
    for name, script, layout, s, t in speeds:
        trace = []
        v = 1.0
        for u in script:
            if u.startswith("set speed to"):
                v = clamp(float(u.split()[-1]))
            elif u in ("go faster", "speed up"):
                v = clamp(v * 1.25)
            elif u == "slow down":
                v = clamp(v * 0.8)
            trace.append(v)
        docs.append(scenario(name, layout, s, script, expected={"goal_node": t, "success": True, "speed_trace": trace}))
    for doc in docs:
        write_json(SCEN / "personalization" / f"{doc['name']}.json", doc)


def ablation(by_name):
    office_map = by_name["office"]
    write_json(SCEN / "ablation" / "ablation_no_planner.json",
               scenario("ablation_no_planner", office_map, "A0", ["take me to the elevator"],
                        ablations={"no_planner": True},
                        expected={"success": False, "final_reason": "no_route_inference"}))
    write_json(SCEN / "ablation" / "ablation_no_system_prompt.json",
               scenario("ablation_no_system_prompt", office_map, "A0", ["take me to the elevator"],
                        ablations={"no_system_prompt": True}))


def main():
    rng = random.Random(20240601)
    layouts = [rectangle(), house(), office(), mall(), bridge()]
    by_name = {layout.name: layout for layout in layouts}
    MAPS.mkdir(parents=True, exist_ok=True)
    for layout in layouts:
        (MAPS / f"{layout.name}.map").write_text(layout.text())
    for sub in SCEN.glob("*/*.json"):
        sub.unlink()
    navigation([by_name["house"], by_name["office"]], rng)
    kidnap([by_name["house"], by_name["office"]], rng)
    hazard([by_name["house"], by_name["office"], by_name["bridge"]], rng)
    personalization(by_name)
    ablation(by_name)


if __name__ == "__main__":
    main()
