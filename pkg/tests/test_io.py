import numpy as np
import pytest

from tailmem.datagen import build_ground_truth, sample_dataset
from tailmem.distribution import build_power_law
from tailmem.io import FormatError, read_estimate, read_sampleset, write_estimate, write_sampleset
from tailmem.solver import min_norm_solve

from test_datagen import make_samples


@pytest.fixture
def samples():
    d = 500
    return sample_dataset(build_power_law(d, 5.0, 1.5), build_ground_truth(d, 0.1), 40, 0.05, seed=2**63 + 5)


def test_sampleset_roundtrip_is_exact(samples, tmp_path):
    path = tmp_path / "s.txt"
    write_sampleset(samples, path)
    back = read_sampleset(path)
    assert (back.n, back.d, back.sigma, back.seed) == (samples.n, samples.d, samples.sigma, samples.seed)
    for name in ("indptr", "indices", "signs", "y"):
        np.testing.assert_array_equal(getattr(back, name), getattr(samples, name))
    # rewriting reproduces the bytes
    path2 = tmp_path / "s2.txt"
    write_sampleset(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_sampleset_layout(tmp_path):
    s = make_samples([{3: 1}, {3: -1, 8: 1}], d=10, y=[0.93, -0.41], sigma=0.05, seed=7)
    path = tmp_path / "s.txt"
    write_sampleset(s, path)
    assert path.read_text().splitlines() == [
        "# tailmem sampleset v1", "n 2", "d 10", "sigma 0.05", "seed 7", "nnz 3",
        "entries", "1 4 1", "2 4 -1", "2 9 1", "labels", "1 0.93", "2 -0.41",
    ]


def test_empty_rows_roundtrip(tmp_path):
    s = make_samples([{}, {2: 1}, {}], d=4, y=[0.1, 0.2, 0.3])
    path = tmp_path / "e.txt"
    write_sampleset(s, path)
    back = read_sampleset(path)
    assert back.indptr.tolist() == [0, 0, 1, 1]


def test_estimate_roundtrip(samples, tmp_path):
    est = min_norm_solve(samples)
    path = tmp_path / "est.txt"
    write_estimate(est, path)
    back = read_estimate(path)
    np.testing.assert_array_equal(back.dense(), est.dense())
    assert (back.rank, back.sv_tolerance, back.residual_norm) == (est.rank, est.sv_tolerance, est.residual_norm)
    lines = path.read_text().splitlines()
    assert lines[:2] == ["# tailmem estimate v1", f"d {samples.d}"]
    assert lines[6] == "coefficients"


def test_format_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("not a sampleset\n")
    with pytest.raises(FormatError):
        read_sampleset(bad)
    bad.write_text("# tailmem estimate v1\nd 3\nsupport 2\nrank 1\nsv_tolerance 0.0\nresidual_norm 0.0\ncoefficients\n1 0.5\n")
    with pytest.raises(FormatError):
        read_estimate(bad)
    bad.write_text("# tailmem sampleset v1\nn 1\nd 3\nsigma 0.0\nseed 1\nnnz 2\nentries\n1 3 1\n1 2 1\nlabels\n1 0.0\n")
    with pytest.raises(FormatError):
        read_sampleset(bad)
