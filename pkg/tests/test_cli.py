import csv
import io

import pytest

from levylibor.cli import (
    BENCH_COLUMNS,
    COMPARE_COLUMNS,
    PRICE_COLUMNS,
    bench_fits,
    cmd_validate,
    git_blob_hash,
    main,
)
from levylibor.config import ConfigError, ExperimentConfig, load_config, parse_config

SMALL = """
[model]
n_rates = 4

[simulation]
schemes = euler, picard
modes = full
paths = 512
block_size = 128
seed = 11

[products]
caplets = 1..N@atm, 2@0.05
fras = 2@atm
swaptions = 1x4@atm
rates = N
"""


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


# config -------------------------------------------------------------------------


def test_defaults_are_reference_setup():
    cfg = ExperimentConfig()
    assert (cfg.model.n_rates, cfg.model.accrual, cfg.model.flat_rate, cfg.model.vol) == (20, 0.5, 0.04, 0.18)
    assert (cfg.model.alpha, cfg.model.beta, cfg.model.mu, cfg.model.delta_bar) == (12.0, 0.0, 0.0, 12.0)
    assert (cfg.simulation.steps_per_tenor, cfg.simulation.paths) == (5, 50000)
    assert load_config(None) == cfg


def test_ini_round_trip():
    cfg = parse_config(SMALL)
    assert parse_config(cfg.to_ini()) == cfg
    assert cfg.simulation.schemes == ("euler", "picard")


def test_products_parse():
    cfg = parse_config(SMALL)
    model = cfg.model.build()
    prods = cfg.build_products(model)
    assert [p.label.split("@")[0] for p in prods] == [
        "caplet[1]", "caplet[2]", "caplet[3]", "caplet[4]", "caplet[2]", "fra[2]", "swaption[1-4]", "rate[4]",
    ]  # fmt: skip
    assert prods[4].strike == 0.05
    assert prods[0].strike == pytest.approx(model.curve.forwards[0])
    offset = parse_config("[products]\ncaplets = 3@atm+0.01\nfras =\nrates =\n")
    m20 = offset.model.build()
    assert offset.build_products(m20)[0].strike == pytest.approx(m20.curve.forwards[2] + 0.01)


@pytest.mark.parametrize(
    "text,section,key,line",
    [
        ("[model]\nn_rates = x\n", "model", "n_rates", 2),
        ("[model]\nvol = 0.18\nbogus = 1\n", "model", "bogus", 3),
        ("[simulation]\n\nschemes = euler, rk4\n", "simulation", "schemes", 3),
        ("[simulation]\npaths = 101\n", "simulation", "paths", 2),
        ("[simulation]\nantithetic = maybe\n", "simulation", "antithetic", 2),
        ("[model]\nalpha = 1\nbeta = 2\n", "model", "alpha", 2),
    ],
)
def test_config_errors_carry_context(text, section, key, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert (exc.value.section, exc.value.key, exc.value.line) == (section, key, line)
    assert f"line {line}" in str(exc.value)


def test_product_errors():
    model = ExperimentConfig().model.build()
    for text in ("[products]\ncaplets = 21@atm\n", "[products]\nswaptions = 5x5@atm\n", "[products]\nfras = 3\n"):
        with pytest.raises(ConfigError):
            parse_config(text).build_products(model)
    with pytest.raises(ConfigError):
        parse_config("[nonsense]\na = 1\n")


# commands -----------------------------------------------------------------------


def test_price_golden_header_and_format(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["price", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "price.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == (
        "scheme,mode,product,kind,expiry,end,strike,price,std_error,half_width,implied_vol,n_paths"
    )
    assert lines[0].split(",") == PRICE_COLUMNS
    rows = read_csv(tmp_path / "o" / "price.csv")
    assert len(rows) == 2 * 8
    first = rows[0]
    assert first["scheme"] == "euler" and first["kind"] == "caplet" and first["end"] == ""
    assert first["strike"] == "0.0404026800535"  # 12 significant digits
    assert max(len(r["price"].replace(".", "").replace("-", "").split("e")[0].lstrip("0")) for r in rows) <= 12
    assert rows[-1]["kind"] == "rate" and rows[-1]["implied_vol"] == "" and rows[-1]["strike"] == ""
    assert text.endswith("\n") and "\r" not in text


def test_manifest_reruns_byte_identically(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["price", "--config", str(cfg), "--seed", "99", "--out", str(tmp_path / "a")]) == 0
    manifest = tmp_path / "a" / "price.csv.manifest.ini"
    body = manifest.read_text()
    assert "seed = 99" in body and "git_blob_sha1 = " in body and "wall_seconds" in body
    assert main(["price", "--config", str(manifest), "--threads", "3", "--out", str(tmp_path / "b")]) == 0
    a, b = (tmp_path / "a" / "price.csv").read_bytes(), (tmp_path / "b" / "price.csv").read_bytes()
    assert a == b
    assert f"git_blob_sha1 = {git_blob_hash(a)}" in body


def test_git_blob_hash_matches_git():
    assert git_blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert git_blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


@pytest.mark.parametrize("threads", [2, 8])
def test_threads_never_change_csv(tmp_path, threads):
    cfg = write(tmp_path, SMALL)
    main(["price", "--config", str(cfg), "--out", str(tmp_path / "one")])
    main(["price", "--config", str(cfg), "--threads", str(threads), "--out", str(tmp_path / "many")])
    assert (tmp_path / "one" / "price.csv").read_bytes() == (tmp_path / "many" / "price.csv").read_bytes()


def test_empty_products_give_header_only(tmp_path):
    cfg = write(tmp_path, SMALL.split("[products]")[0] + "[products]\ncaplets =\nfras =\nswaptions =\nrates =\n")
    assert main(["price", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "price.csv").read_text() == ",".join(PRICE_COLUMNS) + "\n"


def test_compare_self_is_zero_and_header(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "c"
    assert main(["compare", "--config", str(cfg), "--schemes", "ipc,ipc,pc", "--out", str(out)]) == 0
    text = (out / "compare.csv").read_text()
    assert text.splitlines()[0].split(",") == COMPARE_COLUMNS
    rows = read_csv(out / "compare.csv")
    self_rows = [r for r in rows if r["scheme"] == "ipc"]
    assert self_rows and all(float(r["price_diff_bp"]) == 0.0 for r in self_rows)
    assert all(float(r["iv_diff_bp"]) == 0.0 for r in self_rows if r["kind"] == "caplet")
    pc_caplets = [r for r in rows if r["scheme"] == "pc" and r["kind"] == "caplet"]
    assert any(float(r["iv_diff_bp"]) != 0.0 for r in pc_caplets)
    assert all(float(r["iv_diff_se_bp"]) >= 0 for r in pc_caplets)


def test_compare_needs_two_runs(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["compare", "--config", str(cfg), "--schemes", "euler", "--out", str(tmp_path)]) == 2
    assert "at least two" in capsys.readouterr().err


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "PASS LR1 slack=8.4" in out and "PASS LR2" in out
    assert main(["validate", "--config", str(write(tmp_path, "[model]\nn_rates = 67\n"))]) == 1
    assert "FAIL LR1" in capsys.readouterr().out
    assert main(["validate", "--config", str(write(tmp_path, "[model]\nflat_rate = -0.01\n"))]) == 1
    assert "FAIL LR2" in capsys.readouterr().out
    assert main(["validate", "--config", str(write(tmp_path, "[model]\nn_rates = 0\n"))]) == 1
    assert "EMPTY_TENOR" in capsys.readouterr().out


def test_validate_report_slack():
    cfg = parse_config("[model]\nn_rates = 60\n")
    assert cmd_validate(cfg)["LR1"].slack == pytest.approx(1.2)


def test_config_error_exit(tmp_path, capsys):
    assert main(["price", "--config", str(write(tmp_path, "[model]\nn_rates = x\n"))]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["price", "--threads", "0"]) == 2


def test_bench_rows_fits_and_guard(tmp_path, capsys):
    text = """
[model]
n_rates = 6
[simulation]
steps_per_tenor = 1
block_size = 256
[bench]
modes = full, second_order
n_values = 3, 4, 5, 30
n_paths = 256
path_values = 512, 1024
path_n = 4
max_subsequent = 12
"""
    assert main(["bench", "--config", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out
    assert "full_last_rate_cumulant_evals_growth_per_rate" in printed
    rows = read_csv(tmp_path / "bench.csv")
    assert (tmp_path / "bench.csv").read_text().splitlines()[0].split(",") == BENCH_COLUMNS
    refused = [r for r in rows if r["status"].startswith("refused")]
    assert [(r["mode"], r["n_rates"]) for r in refused] == [("full", "30")]
    ok = {(r["mode"], r["n_rates"]): r for r in rows if r["sweep"] == "rates" and r["status"] == "ok"}
    assert int(ok[("full", "5")]["last_rate_cumulant_evals"]) == 2 * 3**4 - 2**4
    assert int(ok[("second_order", "30")]["last_rate_cumulant_evals"]) == 1 + 3 * 29 + 7 * 29 * 28 // 2


def test_bench_fit_values():
    rows = [
        {"sweep": "paths", "mode": "full", "paths": p, "wall_seconds": 0.001 * p, "status": "ok"} for p in (100, 200, 400)
    ] + [
        {"sweep": "rates", "mode": "full", "n_rates": n, "wall_seconds": 2.0**n, "last_rate_cumulant_evals": 3**n, "status": "ok"}
        for n in (4, 5, 6)
    ]  # fmt: skip
    fits = bench_fits(rows)
    assert fits["full_paths_loglog_slope"] == pytest.approx(1.0)
    assert fits["full_wall_seconds_growth_per_rate"] == pytest.approx(2.0)
    assert fits["full_last_rate_cumulant_evals_growth_per_rate"] == pytest.approx(3.0)
