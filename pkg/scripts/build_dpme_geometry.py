"""Generate the bundled dpme (Me2P-CH2-CH2-PMe2) nuclear geometry.

The structure is assembled from standard bond lengths and angles with an anti
P-C-C-P backbone and staggered methyl groups; it is idealized model data, not
a crystallographic structure. Only the P and H nuclei are written out, in a
body frame with the P-P midpoint at the origin and the P-P axis along z.

Usage: python scripts/build_dpme_geometry.py [output_path]
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

BOND_CC = 1.53
BOND_PC = 1.844
BOND_CH = 1.09
ANGLE_CCP = 112.0
ANGLE_CPC = 99.0
ANGLE_H = 109.5
METHYL_DIHEDRALS = (120.0, -120.0)

G_P = 2.261
G_H = 5.585

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "spinbath" / "data" / "dpme.xyz"


def place(a, b, c, bond, angle, dihedral):
    """Position of an atom bonded to ``c`` with angle ``b-c-d`` and dihedral ``a-b-c-d`` (degrees)."""
    angle, dihedral = np.radians(angle), np.radians(dihedral)
    bc = (c - b) / np.linalg.norm(c - b)
    n = np.cross(b - a, bc)
    n /= np.linalg.norm(n)
    m = np.cross(n, bc)
    local = bond * np.array([-np.cos(angle), np.sin(angle) * np.cos(dihedral), np.sin(angle) * np.sin(dihedral)])
    return c + local[0] * bc + local[1] * m + local[2] * n


def build():
    c1 = np.zeros(3)
    c2 = np.array([BOND_CC, 0.0, 0.0])
    p1 = place(np.array([BOND_CC, 1.0, 0.0]), c2, c1, BOND_PC, ANGLE_CCP, 0.0)
    p2 = place(p1, c1, c2, BOND_PC, ANGLE_CCP, 180.0)
    hydrogens = []
    for cx, cy, p in ((c1, c2, p1), (c2, c1, p2)):
        hydrogens.append(place(p, cy, cx, BOND_CH, ANGLE_H, 120.0))
        hydrogens.append(place(p, cy, cx, BOND_CH, ANGLE_H, -120.0))
    for p, cb, other in ((p1, c1, c2), (p2, c2, c1)):
        for dih in METHYL_DIHEDRALS:
            cm = place(other, cb, p, BOND_PC, ANGLE_CPC, dih)
            for hd in (180.0, 60.0, -60.0):
                hydrogens.append(place(cb, p, cm, BOND_CH, ANGLE_H, hd))

    # body frame: origin at the P-P midpoint, z along P1->P2, x from the C1->C2 bond
    mid = 0.5 * (p1 + p2)
    ez = (p2 - p1) / np.linalg.norm(p2 - p1)
    ex = (c2 - c1) - ((c2 - c1) @ ez) * ez
    ex /= np.linalg.norm(ex)
    frame = np.stack([ex, np.cross(ez, ex), ez])
    to_body = lambda r: frame @ (r - mid)  # noqa: E731
    rows = [("P", G_P, to_body(p1), "system"), ("P", G_P, to_body(p2), "system")]
    rows += [("H", G_H, to_body(h), "environment") for h in hydrogens]
    return rows


def main(argv):
    out = Path(argv[1]) if len(argv) > 1 else DEFAULT_OUT
    rows = build()
    lines = [
        "# dpme P and H nuclei, idealized model geometry (see scripts/build_dpme_geometry.py)",
        "# columns: label g_factor x y z [angstrom] role",
        str(len(rows)),
    ]
    lines += [f"{label} {g:.3f} {r[0]:.6f} {r[1]:.6f} {r[2]:.6f} {role}" for label, g, r, role in rows]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(rows)} nuclei to {out}")


if __name__ == "__main__":
    main(sys.argv)
