import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectra.cli import main
from spectra.io import ModelFile, ParseError, parse_dataset, spectrum_records, write_csv
from spectra.spectral_models import Dataset, OrderDecay, PerFrequency, PerOrder, autoregressive_sample, kde_sample, smooth, sparse_model


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_rows(path):
    lines = open(path).read().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def hist_lines(text, n):
    idx = [int(line, 2) for line in text.split()]
    return np.bincount(idx, minlength=2**n) / len(idx)


# -- dataset parsing -------------------------------------------------------------


def test_parse_dataset_comments_and_errors():
    X = parse_dataset(b"# header\n01\n\n11\r\n")
    assert X.to_strings() == ["01", "11"]
    with pytest.raises(ParseError, match="line 2"):
        parse_dataset("01\n1x\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_dataset("01\n10\n1\n")
    with pytest.raises(ParseError):
        parse_dataset(b"# only comments\n")
    with pytest.raises(ParseError):
        parse_dataset(b"\xff\xfe")


def test_csv_format():
    text = write_csv(["a", "b"], [(1, 0.1), (2, 1 / 3)])
    assert text == "a,b\n1,0.1\n2,0.3333333333333333\n"


# -- model files -----------------------------------------------------------------


def test_dense_model_roundtrip():
    X = Dataset.from_strings(["011", "110"])
    mf = ModelFile(3, {"type": "order_decay", "theta": 0.2}, X.digest(), probabilities=smooth(X, OrderDecay(0.2)).distribution)
    text = mf.dumps()
    again = ModelFile.loads(text)
    assert again.dumps() == text
    assert np.array_equal(again.probabilities, mf.probabilities)


@pytest.mark.parametrize("filt", [OrderDecay(0.15), PerOrder((1.0, 0.6, 0.3, 0.1)), PerFrequency({0: 1, 1: 0.5, 6: 0.25j})])
def test_sparse_model_roundtrip(filt):
    X = Dataset.from_strings(["011", "110", "111"])
    m = sparse_model(X, filt, 2)
    mf = ModelFile.from_sparse(m)
    text = mf.dumps()
    back = ModelFile.loads(text)
    assert back.dumps() == text
    m2 = back.to_sparse()
    assert m2.retained() == m.retained()
    assert ModelFile.from_sparse(m2).dumps() == text


def test_loaded_sparse_model_samples_like_in_process():
    X = Dataset.from_strings(["0110", "1011", "0011", "0111"])
    m = sparse_model(X, OrderDecay(0.3), 4)
    loaded = ModelFile.loads(ModelFile.from_sparse(m).dumps()).to_sparse()
    assert np.array_equal(autoregressive_sample(m, 77, 300), autoregressive_sample(loaded, 77, 300))


def test_model_file_rejects_bad_input():
    for text in ["[]", "{}", '{"format_version": 2}', "not json", '{"format_version": 1, "group": {"kind": "boolean", "n": 1}, "filter": {}, "dataset_digest": "", "kind": "dense", "probabilities": [1]}']:
        with pytest.raises(ParseError):
            ModelFile.loads(text)


def test_spectrum_records_sorted():
    recs = spectrum_records([(3, 0.1), (0, 1.0), (2, 0.2), (1, 0.3)], 2)
    assert [r["frequency"] for r in recs] == ["00", "01", "10", "11"]
    assert [r["order"] for r in recs] == [0, 1, 1, 2]


# -- spectrum ------------------------------------------------------------------------


def test_spectrum_single_sample(tmp_path, capsys):
    data = write(tmp_path, "x.txt", "11\n")
    code, out, _ = run(capsys, "spectrum", "--input", data)
    assert code == 0
    recs = json.loads(out)["records"]
    assert [r["re"] for r in recs] == pytest.approx([0.5, -0.5, -0.5, 0.5])


def test_spectrum_top_one_is_k_zero(tmp_path, capsys):
    data = write(tmp_path, "x.txt", "101\n011\n111\n")
    out = tmp_path / "s.json"
    assert main(["spectrum", "--input", data, "--top", "1", "--out", str(out)]) == 0
    recs = json.loads(out.read_text())["records"]
    assert len(recs) == 1 and recs[0]["frequency"] == "000"
    assert recs[0]["re"] == pytest.approx(1 / math.sqrt(8))


def test_spectrum_banded_for_wide_data(tmp_path, capsys):
    rng = np.random.default_rng(0)
    rows = ["".join(map(str, r)) for r in rng.integers(0, 2, size=(5, 30))]
    data = write(tmp_path, "wide.txt", "\n".join(rows) + "\n")
    code, out, _ = run(capsys, "spectrum", "--input", data, "--top", "7")
    assert code == 0
    recs = json.loads(out)["records"]
    assert len(recs) == 7 and all(r["order"] <= 2 for r in recs)


def test_spectrum_errors(tmp_path, capsys):
    assert run(capsys, "spectrum", "--input", write(tmp_path, "e.txt", ""))[0] == 2
    code, _, err = run(capsys, "spectrum", "--input", write(tmp_path, "b.txt", "01\n0a\n"))
    assert code == 2 and "line 2" in err
    assert run(capsys, "spectrum", "--input", str(tmp_path / "missing"))[0] == 1
    assert run(capsys, "spectrum")[0] == 1


# -- smooth --------------------------------------------------------------------------------


def test_smooth_plot_examples(tmp_path, capsys):
    one = write(tmp_path, "one.txt", "1\n")
    plot = tmp_path / "p.csv"
    assert main(["smooth", "--input", one, "--theta", "0.25", "--out", str(tmp_path / "m.json"), "--plot", str(plot)]) == 0
    header, rows = csv_rows(plot)
    assert header == ["index", "bitstring", "probability"]
    assert [(r[0], float(r[2])) for r in rows] == [("0", pytest.approx(0.25)), ("1", pytest.approx(0.75))]
    data = write(tmp_path, "d.txt", "01\n01\n10\n")
    main(["smooth", "--input", data, "--theta", "0.5", "--out", str(tmp_path / "u.json"), "--plot", str(plot)])
    assert [float(r[2]) for r in csv_rows(plot)[1]] == pytest.approx([0.25] * 4)
    main(["smooth", "--input", data, "--theta", "0", "--out", str(tmp_path / "z.json"), "--plot", str(plot)])
    assert [float(r[2]) for r in csv_rows(plot)[1]] == pytest.approx([0, 2 / 3, 1 / 3, 0])
    assert csv_rows(plot)[1][1][1] == "01"


def test_smooth_rejects_theta(tmp_path, capsys):
    data = write(tmp_path, "d.txt", "01\n")
    assert run(capsys, "smooth", "--input", data, "--theta", "1.5", "--out", str(tmp_path / "m.json"))[0] == 1


# -- sample -----------------------------------------------------------------------------


def test_sample_delta_model(tmp_path, capsys):
    data = write(tmp_path, "d.txt", "0110\n")
    model = str(tmp_path / "m.json")
    main(["smooth", "--input", data, "--theta", "0", "--out", model])
    code, out, _ = run(capsys, "sample", "--model", model, "--count", "20", "--seed", "5")
    assert code == 0 and out.split() == ["0110"] * 20


def test_sample_matches_in_process(tmp_path, capsys):
    X = Dataset.from_strings(["0110", "1011", "0011"])
    data = write(tmp_path, "d.txt", "0110\n1011\n0011\n")
    dense, sparse = str(tmp_path / "m.json"), str(tmp_path / "s.json")
    main(["smooth", "--input", data, "--theta", "0.2", "--out", dense])
    main(["smooth", "--input", data, "--theta", "0.2", "--band", "4", "--out", sparse])
    from spectra.spectral_models import exact_sample
    from spectra.io import format_samples

    _, out, _ = run(capsys, "sample", "--model", dense, "--count", "50", "--seed", "9")
    assert out == format_samples(exact_sample(smooth(X, OrderDecay(0.2)), 9, 50))
    _, out, _ = run(capsys, "sample", "--model", sparse, "--count", "50", "--seed", "9")
    assert out == format_samples(autoregressive_sample(sparse_model(X, OrderDecay(0.2), 4), 9, 50))
    _, out, _ = run(capsys, "sample", "--kde", "--input", data, "--theta", "0.2", "--count", "50", "--seed", "9")
    assert out == format_samples(kde_sample(X, 0.2, 9, 50))


def test_sample_kde_versus_model_law(tmp_path, capsys):
    data = write(tmp_path, "d.txt", "011\n110\n100\n")
    model = str(tmp_path / "m.json")
    main(["smooth", "--input", data, "--theta", "0.3", "--out", model])
    _, a, _ = run(capsys, "sample", "--model", model, "--count", "200000", "--seed", "1")
    _, b, _ = run(capsys, "sample", "--kde", "--input", data, "--theta", "0.3", "--count", "200000", "--seed", "2")
    assert 0.5 * np.abs(hist_lines(a, 3) - hist_lines(b, 3)).sum() <= 0.02


def test_sample_errors(tmp_path, capsys):
    data = write(tmp_path, "d.txt", "01\n")
    assert run(capsys, "sample", "--count", "3", "--seed", "1")[0] == 1
    assert run(capsys, "sample", "--kde", "--input", data, "--count", "3")[0] == 1
    assert run(capsys, "sample", "--kde", "--input", data, "--theta", "0.1", "--count", "3", "--seed", "-1")[0] == 1
    bad = write(tmp_path, "bad.json", "{")
    assert run(capsys, "sample", "--model", bad, "--count", "3", "--seed", "1")[0] == 2
    # a stored model with a strongly negative entry
    neg = ModelFile(1, {"type": "per_order", "weights": [1, 2]}, "", probabilities=np.array([-0.5, 1.5]))
    path = write(tmp_path, "neg.json", neg.dumps())
    assert run(capsys, "sample", "--model", path, "--count", "3", "--seed", "1")[0] == 4
    # sparse model whose truncation has a negative conditional
    rows = ["000", "001", "010", "101", "000", "001", "000", "001", "000", "001"]
    src = write(tmp_path, "trunc.txt", "\n".join(rows) + "\n")
    sp = str(tmp_path / "sp.json")
    assert main(["smooth", "--input", src, "--theta", "0", "--band", "1", "--out", sp]) == 0
    assert run(capsys, "sample", "--model", sp, "--count", "500", "--seed", "0")[0] == 4


# -- qsmooth -------------------------------------------------------------------------------


def test_qsmooth_fixture(tmp_path, capsys):
    data = write(tmp_path, "q.txt", "00\n11\n")
    out, rep = tmp_path / "m.json", tmp_path / "r.json"
    assert main(["qsmooth", "--input", data, "--theta", "0.25", "--out", str(out), "--report", str(rep)]) == 0
    report = json.loads(rep.read_text())
    assert report["success_prob"] == pytest.approx(17 / 32)
    assert report["abs_difference"] < 1e-12
    probs = ModelFile.loads(out.read_text()).probabilities
    assert probs == pytest.approx(np.array([25, 9, 9, 25]) / 68)


def test_qsmooth_limits(tmp_path, capsys):
    data = write(tmp_path, "q.txt", "001\n011\n011\n")
    out, rep = tmp_path / "m.json", tmp_path / "r.json"
    main(["qsmooth", "--input", data, "--theta", "0", "--out", str(out), "--report", str(rep)])
    assert ModelFile.loads(out.read_text()).probabilities == pytest.approx([0, 0.5, 0, 0.5, 0, 0, 0, 0])
    assert json.loads(rep.read_text())["duplicates_collapsed"] is True
    main(["qsmooth", "--input", data, "--theta", "0.5", "--out", str(out), "--report", str(rep)])
    assert ModelFile.loads(out.read_text()).probabilities == pytest.approx([1 / 8] * 8)
    # only k = 0 survives: |psi_hat(0)|^2 = |unique points| / 2^n
    assert json.loads(rep.read_text())["success_prob"] == pytest.approx(2 / 8)


def test_qsmooth_errors(tmp_path, capsys, monkeypatch):
    data = write(tmp_path, "q.txt", "01\n")
    assert run(capsys, "qsmooth", "--input", data, "--theta", "0.7", "--out", str(tmp_path / "m.json"))[0] == 1
    monkeypatch.delenv("SPECTRA_GUARD_OVERRIDE", raising=False)
    wide = write(tmp_path, "w.txt", "0" * 21 + "\n")
    assert run(capsys, "qsmooth", "--input", wide, "--theta", "0.1", "--out", str(tmp_path / "m.json"))[0] == 3


def test_qsmooth_postselection_failure_exit(tmp_path, capsys, monkeypatch):
    # a dataset state always keeps |psi_hat(0)|^2 >= 2^-n, so force the failure
    from spectra import quantum_sim
    from spectra.errors import ZeroSuccessProbability

    def fail(*args, **kwargs):
        raise ZeroSuccessProbability("forced")

    monkeypatch.setattr(quantum_sim, "ancilla_decay_filter", fail)
    data = write(tmp_path, "q.txt", "01\n")
    assert run(capsys, "qsmooth", "--input", data, "--theta", "0.2", "--out", str(tmp_path / "m.json"))[0] == 5


# -- fit ---------------------------------------------------------------------------------------


def test_fit_examples(tmp_path, capsys):
    cluster = write(tmp_path, "c.txt", "000000\n" * 5)
    curve = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "fit", "--train", cluster, "--valid", cluster, "--grid", "5", "--out", str(curve))
    assert code == 0 and float(out.split("=")[1]) == pytest.approx(0, abs=1e-6)
    header, rows = csv_rows(curve)
    assert header == ["theta", "loglik"] and len(rows) >= 5
    rng = np.random.default_rng(3)
    noise = "\n".join("".join(map(str, r)) for r in rng.integers(0, 2, size=(2000, 6))) + "\n"
    nv = write(tmp_path, "n.txt", noise)
    code, out, _ = run(capsys, "fit", "--train", cluster, "--valid", nv, "--grid", "5")
    assert float(out.split("=")[1]) > 0.4
    assert run(capsys, "fit", "--train", cluster, "--valid", cluster, "--grid", "2")[0] == 1


# -- qnn-spectrum ---------------------------------------------------------------------------


def test_qnn_spectrum_examples(capsys):
    code, out, _ = run(capsys, "qnn-spectrum", "--eigs", "0,1")
    assert code == 0 and json.loads(out)["omega"] == [-1, 0, 1]
    assert run(capsys, "qnn-spectrum", "--eigs", "")[0] == 1
    assert run(capsys, "qnn-spectrum")[0] == 1
    assert run(capsys, "qnn-spectrum", "--eigs", "0,x")[0] == 2
    code, out, _ = run(capsys, "qnn-spectrum", "--eigs=-0.5,0.5", "--eigs=-0.5,0.5", "--eigs=-0.5,0.5", "--demo-model", "--seed", "3")
    res = json.loads(out)
    assert code == 0 and res["omega"] == [-3, -2, -1, 0, 1, 2, 3]
    assert res["max_out_of_band"] < 1e-9


# -- sn ---------------------------------------------------------------------------------------------


def test_sn_examples(tmp_path, capsys):
    code, out, _ = run(capsys, "sn", "--n", "3", "--marginal", '[{"objects": [2], "positions": [2]}]')
    assert code == 0 and json.loads(out)["marginals"][0]["probability"] == pytest.approx(1.0)
    steps = json.dumps([{"diffuse": 0.5}] * 60)
    csv = tmp_path / "d.csv"
    code, out, _ = run(capsys, "sn", "--n", "4", "--steps", steps, "--marginal", '[{"objects": [2], "positions": [4]}]', "--out", str(csv))
    assert abs(json.loads(out)["marginals"][0]["probability"] - 0.25) < 1e-9
    header, rows = csv_rows(csv)
    assert header == ["permutation", "probability"] and len(rows) == 24


def test_sn_errors(capsys):
    assert run(capsys, "sn", "--n", "3", "--marginal", "[{")[0] == 2
    assert run(capsys, "sn", "--n", "3", "--marginal", '[{"objects": [1, 2], "positions": [1]}]')[0] == 2
    assert run(capsys, "sn", "--n", "3", "--steps", '[{"shuffle": 1}]')[0] == 2
    assert run(capsys, "sn", "--n", "3", "--steps", '[{"diffuse": 2}]')[0] == 2
    cond = '[{"condition": [{"objects": [1], "positions": [1]}]}]'
    assert run(capsys, "sn", "--n", "7", "--steps", cond)[0] == 3
    assert run(capsys, "sn", "--n", "9")[0] == 3
    both = '[{"condition": [{"objects": [1], "positions": [1]}]}, {"condition": [{"objects": [1], "positions": [2]}]}]'
    assert run(capsys, "sn", "--n", "3", "--steps", both)[0] == 4


def test_sn_diffusion_only_reaches_eight(capsys):
    code, out, _ = run(capsys, "sn", "--n", "8", "--steps", '[{"diffuse": 0.5}]', "--marginal", '[{"objects": [1], "positions": [1]}]')
    assert code == 0
    assert json.loads(out)["marginals"][0]["probability"] == pytest.approx(0.5 + 0.5 * 21 / 28)


# -- structured fuzz --------------------------------------------------------------------------

DOCUMENTED = {0, 1, 2, 3, 4, 5}


@settings(max_examples=150)
@given(st.text(alphabet="01\n#\r x", max_size=80), st.sampled_from(["spectrum", "smooth", "qsmooth", "kde", "fit"]))
def test_near_valid_datasets_exit_cleanly(tmp_path_factory, text, command):
    d = tmp_path_factory.mktemp("fz")
    p = str(d / "in.txt")
    open(p, "w").write(text)
    argv = {
        "spectrum": ["spectrum", "--input", p, "--top", "3"],
        "smooth": ["smooth", "--input", p, "--theta", "0.3", "--band", "1", "--out", str(d / "m.json")],
        "qsmooth": ["qsmooth", "--input", p, "--theta", "0.5", "--out", str(d / "q.json"), "--report", str(d / "r.json")],
        "kde": ["sample", "--kde", "--input", p, "--theta", "0.4", "--count", "2", "--seed", "0"],
        "fit": ["fit", "--train", p, "--valid", p, "--grid", "3"],
    }[command]
    assert main(argv) in DOCUMENTED


json_leaf = st.one_of(st.none(), st.booleans(), st.integers(-3, 5), st.floats(allow_nan=True), st.text(max_size=4))
json_value = st.recursive(json_leaf, lambda c: st.lists(c, max_size=3) | st.dictionaries(st.text(max_size=6), c, max_size=3), max_leaves=8)


@settings(max_examples=150)
@given(st.dictionaries(st.sampled_from(["format_version", "group", "filter", "dataset_digest", "kind", "probabilities", "band", "spectrum", "metadata"]), json_value))
def test_mangled_model_files_exit_cleanly(tmp_path_factory, obj):
    d = tmp_path_factory.mktemp("mf")
    p = d / "m.json"
    p.write_text(json.dumps(obj))
    assert main(["sample", "--model", str(p), "--count", "2", "--seed", "0"]) in DOCUMENTED


@settings(max_examples=100)
@given(json_value, json_value)
def test_mangled_sn_json_exits_cleanly(steps, marginal):
    assert main(["sn", "--n", "3", "--steps", json.dumps(steps), "--marginal", json.dumps(marginal)]) in DOCUMENTED


def _sparse_file(spectrum, filt='{"type": "order_decay", "theta": 0.1}', n=2, band=1):
    return (
        f'{{"format_version": 1, "group": {{"kind": "boolean", "n": {n}}}, "filter": {filt}, '
        f'"dataset_digest": "", "kind": "sparse", "band": {band}, "spectrum": {spectrum}}}'
    )


@pytest.mark.parametrize(
    "text",
    [
        _sparse_file("[1]"),
        _sparse_file('[{"frequency": 5, "re": 1, "im": 0}]'),
        _sparse_file('[{"frequency": "01", "re": "a", "im": 0}]'),
        _sparse_file('[{"frequency": "0x", "re": 1, "im": 0}]'),
        _sparse_file('[{"frequency": "11", "re": 1, "im": 0}]'),
        _sparse_file('[{"frequency": "01", "re": 1, "im": 0}, {"frequency": "01", "re": 1, "im": 0}]'),
        _sparse_file('"abc"'),
        _sparse_file("[]", band=-1),
        _sparse_file("[]", filt='{"type": "order_decay", "theta": 5}'),
        _sparse_file("[]", filt='{"type": "per_order", "weights": "ab"}'),
        _sparse_file("[]", filt="[]"),
        _sparse_file("[]", filt='{"type": "amplitude_order_decay", "theta": 0.2}'),
        _sparse_file("[]", n=0),
        '{"format_version": 1, "group": {"kind": "boolean", "n": 1000000000}, "filter": {"type": "order_decay", "theta": 0.1}, '
        '"dataset_digest": "", "kind": "dense", "probabilities": []}',
    ],
)
def test_mangled_model_file_is_parse_error(tmp_path, capsys, text):
    path = write(tmp_path, "m.json", text)
    assert run(capsys, "sample", "--model", path, "--count", "2", "--seed", "0")[0] == 2


def test_qsmooth_model_can_be_sampled(tmp_path, capsys):
    data = write(tmp_path, "q.txt", "00\n11\n")
    model = str(tmp_path / "q.json")
    main(["qsmooth", "--input", data, "--theta", "0.25", "--out", model, "--report", str(tmp_path / "r.json")])
    code, out, _ = run(capsys, "sample", "--model", model, "--count", "4", "--seed", "1")
    assert code == 0 and len(out.split()) == 4
