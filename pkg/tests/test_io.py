import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from spincollapse.io import (
    CONVENTIONS,
    TRAJECTORY_HEADER,
    format_number,
    read_json,
    read_trajectory,
    trajectory_text,
    write_json,
    write_trajectory,
)
from spincollapse.solvers import TrajectoryRecord

# 15-digit rounding of values near the float maximum overflows to inf
finite = st.floats(min_value=-1e300, max_value=1e300, allow_nan=False, width=64)


def _record(rows):
    tr = TrajectoryRecord()
    for name, col in zip(TRAJECTORY_HEADER, zip(*rows)):
        setattr(tr, name, list(col))
    return tr


def test_header_is_exact():
    assert trajectory_text(TrajectoryRecord()) == "t,M,E_exch,S_sys_z,B_field,norm,E_U\n"


@given(st.lists(st.tuples(*[finite] * 7), min_size=1, max_size=5))
def test_round_trip_at_fifteen_digits(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("io") / "traj.csv"
    write_trajectory(path, _record(rows))
    back = read_trajectory(path)
    for k, name in enumerate(TRAJECTORY_HEADER):
        want = [float(format_number(r[k])) for r in rows]
        assert back[name].tolist() == want
    # a second write of the parsed values is byte-identical
    path2 = path.with_name("again.csv")
    write_trajectory(path2, _record([tuple(back[n][i] for n in TRAJECTORY_HEADER) for i in range(len(rows))]))
    assert path.read_bytes() == path2.read_bytes()


def test_fifteen_significant_digits():
    assert format_number(math.pi) == "3.14159265358979"
    assert format_number(0.0) == "0" and format_number(-0.0) == "0"


def test_json_payload(tmp_path):
    p = write_json(tmp_path / "s.json", {"x": np.float64(1.5), "n": np.int64(3), "bad": math.nan,
                                         "arr": np.arange(3), "conv": CONVENTIONS})
    d = read_json(p)
    assert d["x"] == 1.5 and d["n"] == 3 and d["bad"] is None and d["arr"] == [0, 1, 2]
    assert "S^y" in d["conv"]["spin_operators"]
