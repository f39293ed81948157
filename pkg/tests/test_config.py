import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavegrow.config import SCHEMA, emit_config, parse_config, parse_config_text
from wavegrow.errors import ConfigError

MINIMAL = "grid.dim = 1\ngrid.n = 64\ngrid.L = 8.0\n"


def test_minimal_fills_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg["potential.amplitude"] == 1.0
    assert cfg.k_list == (1, 2)
    assert cfg.grid.n == 64
    assert set(cfg.values) == set(SCHEMA)
    assert cfg.integrator.dt == pytest.approx(0.25 * 16.0 / 64)


def test_radius_vs_half_width_single_error():
    with pytest.raises(ConfigError) as err:
        parse_config_text(MINIMAL + "potential.radius = 8.0\n")
    assert len(err.value.errors) == 1
    key, _ = err.value.errors[0]
    assert "potential.radius" in key and "grid.L" in key


def test_all_errors_collected():
    text = "grid.dim = 5\ngrid.n = 48\npotential.omega = -1\nbogus.key = 3\nnot a line\nseed = x\n"
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    keys = {k for k, _ in err.value.errors}
    assert {"grid.dim", "grid.n", "grid.L", "potential.omega", "bogus.key", "seed"} <= keys
    assert any(k.startswith("line") for k in keys)


def test_duplicates_and_types():
    with pytest.raises(ConfigError) as err:
        parse_config_text(MINIMAL + "grid.n = 32\nintegrator.cubic_enabled = maybe\nexperiment.k_list = 0, 1\n")
    keys = [k for k, _ in err.value.errors]
    assert "grid.n" in keys and "integrator.cubic_enabled" in keys and "experiment.k_list" in keys


def test_from_file_requires_existing_path(tmp_path):
    with pytest.raises(ConfigError) as err:
        parse_config_text(MINIMAL + "data.preset = from-file\ndata.path = nope.bin\n", base_dir=str(tmp_path))
    assert err.value.errors[0][0] == "data.path"


def test_round_trip():
    text = MINIMAL + "potential.omega = 2.5\nexperiment.k_list = 1, 2, 3\ndata.preset = single-mode\nseed = 42\n"
    cfg = parse_config_text(text)
    again = parse_config_text(emit_config(cfg))
    assert again == cfg
    assert emit_config(again) == emit_config(cfg)


def test_parse_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\n" + MINIMAL + "output.dir = out  # trailing comment\n")
    cfg = parse_config(p)
    assert cfg["output.dir"] == "out"
    assert cfg.resolve("out") == str(tmp_path / "out")
    p.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(ConfigError):
        parse_config(p)
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.cfg")


def _mutate(rng, text):
    lines = text.splitlines()
    op = rng.integers(6)
    if op == 0 and lines:
        del lines[rng.integers(len(lines))]
    elif op == 1:
        i = rng.integers(len(lines)) if lines else 0
        junk = "".join(chr(c) for c in rng.integers(0, 0x2FF, rng.integers(1, 12)))
        lines.insert(i, junk)
    elif op == 2 and lines:
        i = rng.integers(len(lines))
        k = lines[i].partition("=")[0]
        lines[i] = f"{k}= {rng.choice(['-1', '1e999', 'nan', '', '0', '3.5', 'true', '1,2', '99999999999999999999'])}"
    elif op == 3 and lines:
        i = rng.integers(len(lines))
        s = lines[i]
        j = rng.integers(len(s) + 1)
        lines[i] = s[:j] + chr(int(rng.integers(32, 127))) + s[j:]
    elif op == 4:
        key = rng.choice(list(SCHEMA))
        lines.append(f"{key} = {rng.standard_normal() * 10.0 ** rng.integers(-3, 6)}")
    else:
        lines = lines[::-1]
    return "\n".join(lines)


def test_fuzz_is_total():
    rng = np.random.default_rng(7)
    base = emit_config(parse_config_text(MINIMAL + "potential.radius = 2.0\n"))
    ok = bad = 0
    for _ in range(10_000):
        text = base
        for _ in range(rng.integers(1, 4)):
            text = _mutate(rng, text)
        try:
            parse_config_text(text)
            ok += 1
        except ConfigError as exc:
            assert exc.errors
            bad += 1
    assert ok + bad == 10_000 and ok > 0 and bad > 0


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=400))
def test_arbitrary_text_never_crashes(text):
    try:
        parse_config_text(text)
    except ConfigError:
        pass
