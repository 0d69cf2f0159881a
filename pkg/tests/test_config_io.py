import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torus_ma import fieldio
from torus_ma.config import load_config, parse_config
from torus_ma.errors import InvalidMetric, ParseError
from torus_ma.grid import TorusGrid, min_eigenvalue

from conftest import random_positive_field

FLAT = """
[problem]
n = 2
N = 8
metric = flat

[schedule]
t_min = 0.1
"""

PERTURBED = """\
[problem]
n = 1
N = 32
metric = perturbed
modes =
    {amp}  1 0  0.0

[schedule]
t_min = 0.1
"""


def test_flat_config_defaults():
    cfg = parse_config(FLAT)
    assert (cfg.n, cfg.N, cfg.t_min) == (2, 8, 0.1)
    assert cfg.min_eig == pytest.approx(1.0)
    assert cfg.t1 == "auto" and cfg.ratio == 0.7 and cfg.suite.tol.rel == 1e-8
    assert cfg.to_dict()["problem"]["min_eig"] == pytest.approx(1.0)


def test_perturbed_config_positive():
    cfg = parse_config(PERTURBED.format(amp=0.02))
    assert cfg.min_eig == pytest.approx(min_eigenvalue(cfg.metric_field()))
    assert 0 < cfg.min_eig < 1


def test_large_amplitude_is_invalid_metric():
    with pytest.raises(InvalidMetric) as exc:
        parse_config(PERTURBED.format(amp=0.2))
    assert exc.value.min_eig <= 0
    cfg = parse_config(PERTURBED.format(amp=0.2), validate=False)
    assert exc.value.min_eig == pytest.approx(min_eigenvalue(cfg.metric_field()))


def test_missing_t_min():
    with pytest.raises(ParseError) as exc:
        parse_config(FLAT.replace("t_min = 0.1", ""))
    assert exc.value.field == "t_min"


def test_bad_mode_line_has_line_number():
    text = PERTURBED.format(amp=0.02).replace("0.02  1 0  0.0", "0.02  1")
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert exc.value.field == "modes" and exc.value.line == 6


@pytest.mark.parametrize("edit,field", [
    (("N = 8", "N = 12"), "N"),
    (("metric = flat", "metric = round"), "metric"),
    (("t_min = 0.1", "t_min = 0.1\nratio = 1.5"), "ratio"),
    (("t_min = 0.1", "t_min = 0.1\nt1 = 0.05"), "t1"),
])
def test_invalid_values(edit, field):
    with pytest.raises(ParseError) as exc:
        parse_config(FLAT.replace(*edit))
    assert exc.value.field == field


def test_unknown_section_and_check():
    with pytest.raises(ParseError):
        parse_config(FLAT + "\n[extra]\nx = 1\n")
    with pytest.raises(ParseError) as exc:
        parse_config(FLAT + "\n[estimates]\nchecks = schwarz, nonsense\n")
    assert exc.value.field == "checks"


def test_check_subset_and_tolerances():
    cfg = parse_config(FLAT + "\n[estimates]\nchecks = max_u, hormander\nrel_tol = 0\nabs_tol = 0\n")
    assert cfg.suite.checks == ("max_u", "hormander")
    assert cfg.suite.tol(1e6) == 0.0


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.ini")


def test_metric_file_roundtrip(tmp_path, rng):
    grid = TorusGrid(1, 8)
    g = random_positive_field(grid, rng)
    fieldio.save(tmp_path / "omega.bin", grid, g)
    (tmp_path / "c.ini").write_text("[problem]\nn = 1\nN = 8\nmetric = file\nfile = omega.bin\n"
                                    "[schedule]\nt_min = 0.1\n")
    cfg = load_config(tmp_path / "c.ini")
    assert np.array_equal(cfg.metric_field(), g)


def test_metric_file_wrong_grid(tmp_path):
    grid = TorusGrid(1, 16)
    fieldio.save(tmp_path / "omega.bin", grid, grid.identity())
    (tmp_path / "c.ini").write_text("[problem]\nn = 1\nN = 8\nmetric = file\nfile = omega.bin\n"
                                    "[schedule]\nt_min = 0.1\n")
    with pytest.raises(ParseError):
        load_config(tmp_path / "c.ini")


# --- field I/O -----------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("suffix", [".bin", ".csv"])
def test_field_roundtrip(tmp_path, rng, n, suffix):
    grid = TorusGrid(n, 8)
    scalar = rng.normal(size=grid.shape)
    mat = rng.normal(size=grid.shape + (n, n)) + 1j * rng.normal(size=grid.shape + (n, n))
    for name, f in (("s", scalar), ("m", mat)):
        path = tmp_path / (name + suffix)
        fieldio.save(path, grid, f)
        g2, f2 = fieldio.load(path)
        assert g2 == grid and np.array_equal(f2, f)


def test_binary_layout():
    grid = TorusGrid(1, 8)
    f = np.arange(64, dtype=float).reshape(grid.shape)
    data = fieldio.to_bytes(grid, f)
    assert len(data) == 8 + 8 * 64
    assert np.frombuffer(data[:8], "<i4").tolist() == [1, 8]
    assert np.frombuffer(data[8:], "<f8")[5] == 5.0


def test_csv_layout():
    grid = TorusGrid(1, 8)
    text = fieldio.to_csv(grid, np.full(grid.shape, 0.1))
    lines = text.splitlines()
    assert lines[:2] == ["n,N", "1,8"] and len(lines) == 66
    assert float(lines[2]) == 0.1


def test_corrupt_fields():
    with pytest.raises(ParseError):
        fieldio.from_bytes(b"\x01\x00")
    grid = TorusGrid(1, 8)
    with pytest.raises(ParseError):
        fieldio.from_bytes(fieldio.to_bytes(grid, np.zeros(grid.shape))[:-8])
    with pytest.raises(ParseError):
        fieldio.from_csv("a,b\n1,8\n")
    with pytest.raises(ValueError):
        fieldio.to_bytes(grid, np.zeros((4, 4)))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=64, max_size=64))
def test_csv_exact_roundtrip(values):
    grid = TorusGrid(1, 8)
    f = np.array(values).reshape(grid.shape)
    assert np.array_equal(fieldio.from_csv(fieldio.to_csv(grid, f))[1], f)
