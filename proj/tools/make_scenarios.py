#!/usr/bin/env python3
"""Regenerates the bundled surfaces and scenario files under scenarios/."""

import json
import math
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "scenarios"
DEGREE = 3
LO, HI = 0.0, 40.0
NUM_CTRL = 12


def clamped_knots(n, degree, lo, hi):
    inner = n - degree
    return [lo] * degree + [lo + (hi - lo) * i / inner for i in range(inner + 1)] + [hi] * degree


def greville(knots, degree, n):
    return [sum(knots[i + 1:i + degree + 1]) / degree for i in range(n)]


def terrain(u, v):
    return (1.2 * math.sin(0.22 * u + 0.4) * math.cos(0.18 * v - 0.3)
            + 0.5 * math.sin(0.35 * v + 0.1 * u))


def surface(height):
    knots = clamped_knots(NUM_CTRL, DEGREE, LO, HI)
    g = greville(knots, DEGREE, NUM_CTRL)
    return {
        "degree_u": DEGREE,
        "degree_v": DEGREE,
        "knots_u": knots,
        "knots_v": knots,
        "control_points": [[round(height(gu, gv), 6) for gv in g] for gu in g],
    }


def loop(cx, cy, rx, ry, n=8):
    pts = []
    for i in range(n):
        a = 2 * math.pi * i / n
        wobble = 1.0 + 0.12 * math.sin(3 * a)
        pts.append([round(cx + rx * wobble * math.cos(a), 4), round(cy + ry * wobble * math.sin(a), 4)])
    return pts


def scenario(surface_file, anchors, schedule="three_phase", duration=90.0, trials=100):
    return {
        "surface": surface_file,
        "trajectory": {
            "kind": "waypoints",
            "waypoints": loop(20.0, 20.0, 11.0, 9.0),
            "closed": True,
            "speed": 1.0,
            "acceleration": 0.5,
            "duration": duration,
            "dt": 0.05,
        },
        "sensors": {
            "odometry_rate": 20.0,
            "odometry_linear_std": 0.02,
            "odometry_angular_std": 0.01,
            "pose_rate": 5.0,
            "pose_position_std": 0.03,
            "pose_orientation_std": 0.01,
            "range_rate": 10.0,
            "range_std": 0.05,
            "anchors": anchors,
            "extrinsics": {"lever_arm": [0.1, 0.0, 0.3], "rotation": [1.0, 0.0, 0.0, 0.0]},
        },
        "schedule": schedule,
        "sampling": {"mahalanobis_radius": 3.0, "resolution": 21},
        "pseudo": {"sigma_z": 0.01, "sigma_rp": 0.01, "rate": 20.0},
        "initial": {"position_std": 0.1, "heading_std": 0.05},
        "filter": "m-esekf",
        "trials": trials,
        "seed": 1,
        "divergence": {"threshold_m": 10.0, "max_exclusion_rate": 0.1},
    }


def main():
    (ROOT / "surfaces").mkdir(parents=True, exist_ok=True)
    curved = surface(terrain)
    flat = surface(lambda u, v: 0.0)
    (ROOT / "surfaces" / "curved.json").write_text(json.dumps(curved, indent=1) + "\n")
    (ROOT / "surfaces" / "flat.json").write_text(json.dumps(flat, indent=1) + "\n")

    lateral = [[4.0, 20.0], [36.0, 20.0]]
    curved_anchors = [[u, v, round(terrain(u, v) + 2.0, 4)] for u, v in lateral]
    flat_anchors = [[u, v, 2.0] for u, v in lateral]
    files = {
        "curved.json": scenario("surfaces/curved.json", curved_anchors),
        "flat.json": scenario("surfaces/flat.json", flat_anchors),
        "flat_pose_only.json": scenario("surfaces/flat.json", flat_anchors, schedule="pose_only"),
    }
    for name, body in files.items():
        (ROOT / name).write_text(json.dumps(body, indent=2) + "\n")


if __name__ == "__main__":
    main()
