"""Published confusion counts and the integer percentages printed next to them.

Each column is ``(label, (tp, fp, fn, tn), (pre, sen, spe, acc))``. Columns
come in H / L / Avg triples for one scenario or ablation arm.
"""

ALL_SIGNALS = [
    ("all worst H", (4, 4, 3, 2), (50, 57, 33, 46)),
    ("all worst L", (2, 3, 4, 4), (40, 33, 57, 46)),
    ("all worst Avg", (3, 3.5, 3.5, 3), (46, 46, 46, 46)),
    ("all average H", (3, 2, 4, 4), (60, 43, 67, 54)),
    ("all average L", (4, 4, 2, 3), (50, 67, 43, 54)),
    ("all average Avg", (3.5, 3, 3, 3.5), (54, 54, 54, 54)),
    ("all best H", (5, 1, 2, 5), (83, 71, 83, 77)),
    ("all best L", (5, 2, 1, 5), (71, 83, 71, 77)),
    ("all best Avg", (5, 1.5, 1.5, 5), (77, 77, 77, 77)),
]

SIGNAL_GROUPS = [
    ("accel H", (1, 0, 6, 6), (100, 14, 100, 54)),
    ("accel L", (6, 6, 0, 1), (50, 100, 14, 54)),
    ("accel Avg", (3.5, 3, 3, 3.5), (54, 54, 54, 54)),
    ("gravity H", (0, 1, 7, 5), (0, 0, 83, 38)),
    ("gravity L", (5, 7, 1, 0), (42, 83, 0, 38)),
    ("gravity Avg", (2.5, 4, 4, 2.5), (38, 38, 38, 38)),
    ("attitude H", (3, 3, 4, 3), (50, 43, 50, 46)),
    ("attitude L", (3, 4, 3, 3), (43, 50, 43, 46)),
    ("attitude Avg", (3, 3.5, 3.5, 3), (46, 46, 46, 46)),
    ("gyro H", (6, 4, 1, 2), (60, 86, 33, 62)),
    ("gyro L", (2, 1, 4, 6), (67, 33, 86, 62)),
    ("gyro Avg", (4, 2.5, 2.5, 4), (62, 62, 62, 62)),
]

FEATURE_FAMILIES = [
    ("czt worst H", (3, 4, 4, 2), (43, 43, 33, 38)),
    ("czt worst L", (2, 4, 4, 3), (33, 33, 43, 38)),
    ("czt worst Avg", (2.5, 4, 4, 2.5), (38, 38, 38, 38)),
    ("czt average H", (3, 3, 4, 3), (50, 43, 50, 46)),
    ("czt average L", (3, 4, 3, 3), (43, 50, 43, 46)),
    ("czt average Avg", (3, 3.5, 3.5, 3), (46, 46, 46, 46)),
    ("czt best H", (4, 1, 3, 5), (80, 57, 83, 69)),
    ("czt best L", (5, 3, 1, 4), (63, 83, 57, 69)),
    ("czt best Avg", (4.5, 2, 2, 4.5), (69, 69, 69, 69)),
    # printed sensitivity 40 although 3 / (3 + 4) rounds to 43
    ("cdf worst H", (3, 4, 4, 2), (43, 40, 33, 38)),
    ("cdf worst L", (2, 4, 4, 3), (33, 33, 43, 38)),
    ("cdf worst Avg", (2.5, 4, 4, 2.5), (38, 38, 38, 38)),
    ("cdf average H", (4, 3, 3, 3), (57, 57, 50, 54)),
    ("cdf average L", (3, 3, 3, 4), (50, 50, 57, 54)),
    ("cdf average Avg", (3.5, 3, 3, 3.5), (54, 54, 54, 54)),
    ("cdf best H", (6, 4, 1, 2), (60, 86, 33, 62)),
    ("cdf best L", (2, 1, 4, 6), (67, 33, 86, 62)),
    ("cdf best Avg", (4, 2.5, 2.5, 4), (62, 62, 62, 62)),
]

ALL_COLUMNS = ALL_SIGNALS + SIGNAL_GROUPS + FEATURE_FAMILIES

# the single printed cell that disagrees with its own counts
KNOWN_MISPRINTS = {("cdf worst H", "sensitivity")}


def triples(columns):
    """Group columns into (H, L, Avg) triples."""
    return [columns[i:i + 3] for i in range(0, len(columns), 3)]
