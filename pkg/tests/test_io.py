import json

import numpy as np
import pytest

from expert_timing import io as aio
from expert_timing.simulator import FinalStop, ImmediateStop, monte_carlo
from expert_timing.solver import SolverConfig, solve


@pytest.fixture(scope="module")
def small():
    return solve(SolverConfig(T=15, gamma=0.01, store_full_grid=True))


def test_fmt():
    assert aio.fmt(None) == "" and aio.fmt(float("nan")) == ""
    assert aio.fmt(True) == "true" and aio.fmt(np.bool_(False)) == "false"
    assert aio.fmt(np.int64(7)) == "7" and aio.fmt("abc") == "abc"
    assert aio.fmt(1 / 3) == "0.333333333333"
    assert aio.fmt(1e-20) == "1e-20"


def test_policy_roundtrip(tmp_path, small):
    aio.save_policy(small, tmp_path, include_rows=True)
    back = aio.load_policy(tmp_path)
    np.testing.assert_array_equal(back.theta, small.theta)
    np.testing.assert_array_equal(back.psi0, small.psi0)
    assert back.config == small.config
    np.testing.assert_array_equal(back.row(7).values, small.row(7).values)
    assert back.psi(7, 0.3) == small.psi(7, 0.3)


def test_policy_csv_roundtrip_at_printed_precision(tmp_path, small):
    _, pc = aio.save_policy(small, tmp_path)
    cols = aio.read_policy_csv(pc)
    np.testing.assert_array_equal(cols["t"][1:], np.arange(1, 16))
    for key, arr in (("theta", small.theta), ("psi0", small.psi0), ("capital_psi", small.capital_psi)):
        printed = np.array([float(aio.fmt(v)) for v in arr[1:]])
        np.testing.assert_array_equal(cols[key][1:], printed)
    assert pc.read_text().splitlines()[0] == ",".join(aio.POLICY_CSV_HEADER)


def test_policy_json_without_rows(tmp_path, small):
    pj, _ = aio.save_policy(small, tmp_path)
    doc = json.loads(pj.read_text())
    assert "rows" not in doc and doc["T"] == 15 and doc["theta"][0] is None


def test_read_policy_csv_rejects_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        aio.read_policy_csv(p)


def test_atomic_write_leaves_no_temp_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.csv"
    target.write_text("old\n")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(aio.os, "replace", boom)
    with pytest.raises(OSError):
        aio.atomic_write_text(target, "new\n")
    assert target.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]


def test_figure2_columns(small):
    lines = aio.figure2_csv_text(small).splitlines()
    assert lines[0] == "t,theta_sq_over_t,psi0,two_loglog_t"
    assert lines[1].endswith(",") and lines[2].endswith(",")
    assert not lines[3].endswith(",")


def test_sim_and_paths_csv():
    res = monte_carlo([ImmediateStop(), FinalStop()], 5, 3, 1, keep_paths=True)
    sim = aio.sim_csv_text(res).splitlines()
    assert sim[0] == "policy,n,mean_reward,stderr,mean_stop_time"
    assert sim[1].startswith("immediate,3,")
    paths = aio.paths_csv_text(res).splitlines()
    assert paths[0] == "path_id,policy,stop_t,reward" and len(paths) == 7
    assert paths[1].startswith("0,immediate,5,")
    with pytest.raises(ValueError):
        aio.paths_csv_text(monte_carlo([FinalStop()], 5, 3, 1))


def test_manifest_hashes(tmp_path):
    f = aio.atomic_write_text(tmp_path / "a.csv", "x\n")
    m = aio.write_manifest(tmp_path, "solve", {"seed": 42}, [f])
    doc = json.loads(m.read_text())
    assert doc["artifacts"]["a.csv"] == aio.sha256_file(f)
    assert doc["config"]["seed"] == 42
