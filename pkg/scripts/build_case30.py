"""Write the desk-scale 30-bus case shipped with seisgrid.

Topology and impedances follow the IEEE 30-bus test system (transformer taps
and bus shunts dropped). Coordinates are synthetic: a coastal strip of
load buses, a valley corridor, and an inland generation core, so the
Damage Zone box captures roughly two thirds of the buses.

Usage: python scripts/build_case30.py [out.json]
"""

import json
import sys
from pathlib import Path

LOCATIONS = {
    1: (44.0, -114.2), 2: (45.5, -116.0), 3: (46.2, -119.5), 4: (45.6, -120.4),
    5: (43.0, -117.2), 6: (45.5, -122.6), 7: (44.0, -118.5), 8: (44.9, -123.0),
    9: (47.6, -122.3), 10: (47.2, -122.4), 11: (46.6, -120.5), 12: (46.0, -122.9),
    13: (47.0, -123.8), 14: (46.9, -124.1), 15: (46.2, -123.8), 16: (45.0, -123.95),
    17: (44.6, -124.05), 18: (48.1, -123.4), 19: (43.4, -124.2), 20: (42.4, -124.4),
    21: (41.7, -124.2), 22: (42.3, -122.9), 23: (40.8, -124.15), 24: (40.4, -124.0),
}

# bus: (location, base_kv)
BUSES = {
    1: (1, 500.0), 2: (2, 500.0), 3: (3, 500.0), 4: (4, 500.0), 5: (5, 500.0),
    6: (6, 500.0), 7: (7, 500.0), 8: (8, 500.0), 9: (6, 230.0), 10: (6, 230.0),
    11: (6, 13.8), 12: (4, 230.0), 13: (4, 13.8), 14: (9, 115.0), 15: (10, 115.0),
    16: (11, 115.0), 17: (12, 115.0), 18: (13, 115.0), 19: (14, 115.0), 20: (15, 115.0),
    21: (16, 115.0), 22: (17, 115.0), 23: (18, 115.0), 24: (19, 115.0), 25: (20, 115.0),
    26: (21, 115.0), 27: (22, 115.0), 28: (22, 500.0), 29: (23, 115.0), 30: (24, 115.0),
}

# from, to, r, x, b, transformer
BRANCHES = [
    (1, 2, 0.0192, 0.0575, 0.0528, False), (1, 3, 0.0452, 0.1652, 0.0408, False),
    (2, 4, 0.0570, 0.1737, 0.0368, False), (3, 4, 0.0132, 0.0379, 0.0084, False),
    (2, 5, 0.0472, 0.1983, 0.0418, False), (2, 6, 0.0581, 0.1763, 0.0374, False),
    (4, 6, 0.0119, 0.0414, 0.0090, False), (5, 7, 0.0460, 0.1160, 0.0204, False),
    (6, 7, 0.0267, 0.0820, 0.0170, False), (6, 8, 0.0120, 0.0420, 0.0090, False),
    (6, 9, 0.0, 0.2080, 0.0, True), (6, 10, 0.0, 0.5560, 0.0, True),
    (9, 11, 0.0, 0.2080, 0.0, True), (9, 10, 0.0, 0.1100, 0.0, True),
    (4, 12, 0.0, 0.2560, 0.0, True), (12, 13, 0.0, 0.1400, 0.0, True),
    (12, 14, 0.1231, 0.2559, 0.0, False), (12, 15, 0.0662, 0.1304, 0.0, False),
    (12, 16, 0.0945, 0.1987, 0.0, False), (14, 15, 0.2210, 0.1997, 0.0, False),
    (16, 17, 0.0524, 0.1923, 0.0, False), (15, 18, 0.1073, 0.2185, 0.0, False),
    (18, 19, 0.0639, 0.1292, 0.0, False), (19, 20, 0.0340, 0.0680, 0.0, False),
    (10, 20, 0.0936, 0.2090, 0.0, False), (10, 17, 0.0324, 0.0845, 0.0, False),
    (10, 21, 0.0348, 0.0749, 0.0, False), (10, 22, 0.0727, 0.1499, 0.0, False),
    (21, 22, 0.0116, 0.0236, 0.0, False), (15, 23, 0.1000, 0.2020, 0.0, False),
    (22, 24, 0.1150, 0.1790, 0.0, False), (23, 24, 0.1320, 0.2700, 0.0, False),
    (24, 25, 0.1885, 0.3292, 0.0, False), (25, 26, 0.2544, 0.3800, 0.0, False),
    (25, 27, 0.1093, 0.2087, 0.0, False), (28, 27, 0.0, 0.3960, 0.0, True),
    (27, 29, 0.2198, 0.4153, 0.0, False), (27, 30, 0.3202, 0.6027, 0.0, False),
    (29, 30, 0.2399, 0.4533, 0.0, False), (8, 28, 0.0636, 0.2000, 0.0428, False),
    (6, 28, 0.0169, 0.0599, 0.0130, False),
]

# bus, pmax, qmax, qmin, vset
GENERATORS = [
    (1, 200.0, 150.0, -20.0, 1.060), (2, 80.0, 60.0, -20.0, 1.043),
    (5, 50.0, 62.5, -15.0, 1.010), (8, 35.0, 48.7, -15.0, 1.010),
    (11, 30.0, 40.0, -10.0, 1.082), (13, 40.0, 44.7, -15.0, 1.071),
]

LOADS = {
    2: (21.7, 12.7), 3: (2.4, 1.2), 4: (7.6, 1.6), 5: (94.2, 19.0), 7: (22.8, 10.9),
    8: (30.0, 30.0), 10: (5.8, 2.0), 12: (11.2, 7.5), 14: (6.2, 1.6), 15: (8.2, 2.5),
    16: (3.5, 1.8), 17: (9.0, 5.8), 18: (3.2, 0.9), 19: (9.5, 3.4), 20: (2.2, 0.7),
    21: (17.5, 11.2), 23: (3.2, 1.6), 24: (8.7, 6.7), 26: (3.5, 2.3), 29: (2.4, 0.9),
    30: (10.6, 1.9),
}

DAMAGE_ZONE = (39.0, 49.0, -130.0, -121.0)


def build() -> dict:
    gen_buses = {g[0] for g in GENERATORS}
    doc = {
        "name": "desk30",
        "base_mva": 100.0,
        "locations": [{"id": k, "lat": lat, "lon": lon} for k, (lat, lon) in LOCATIONS.items()],
        "buses": [
            {"id": b, "location": loc, "base_kv": kv, "kind": "slack" if b == 1 else ("PV" if b in gen_buses else "PQ")}
            for b, (loc, kv) in BUSES.items()
        ],
        "branches": [
            {"id": i + 1, "from": f, "to": t, "r": r, "x": x, "b": b, "transformer": tr}
            for i, (f, t, r, x, b, tr) in enumerate(BRANCHES)
        ],
        "generators": [
            {"id": i + 1, "bus": b, "pmax": p, "pmin": 0.0, "qmax": qx, "qmin": qn, "vset": v}
            for i, (b, p, qx, qn, v) in enumerate(GENERATORS)
        ],
        "loads": [{"id": i + 1, "bus": b, "p": p, "q": q} for i, (b, (p, q)) in enumerate(LOADS.items())],
    }

    lat0, lat1, lon0, lon1 = DAMAGE_ZONE
    zone = {
        b for b, (loc, _) in BUSES.items()
        if lat0 <= LOCATIONS[loc][0] <= lat1 and lon0 <= LOCATIONS[loc][1] <= lon1
    }
    doc["meta"] = {
        "totals": {
            "bus_count": len(BUSES),
            "gen_capacity_mw": round(sum(g[1] for g in GENERATORS), 6),
            "load_mw": round(sum(p for p, _ in LOADS.values()), 6),
        },
        "damage_zone_totals": {
            "bus_count": len(zone),
            "gen_capacity_mw": round(sum(g[1] for g in GENERATORS if g[0] in zone), 6),
            "load_mw": round(sum(p for b, (p, _) in LOADS.items() if b in zone), 6),
        },
    }
    return doc


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/seisgrid/data/case30.json"
    out.write_text(json.dumps(build(), indent=1) + "\n")
    print(f"wrote {out}")
