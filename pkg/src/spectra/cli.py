"""Command-line interface.

Exit codes: 0 success, 1 usage, 2 parse error, 3 size guard, 4 invalid model
(negative mass, negative conditional, zero posterior), 5 postselection failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

import numpy as np
from scipy.stats import unitary_group

from .config import CONFIG, guard_override
from .errors import (
    GuardError,
    NegativeConditional,
    NegativeMass,
    NormalizationError,
    ZeroPosteriorMass,
    ZeroSuccessProbability,
)
from .group_core import GroupSpec, bits_to_str, fourier, weights
from .io import (
    ModelFile,
    ParseError,
    default_metadata,
    filter_to_json,
    format_samples,
    parse_dataset,
    spectrum_file,
    write_csv,
)
from . import quantum_sim as qs
from . import spectral_models as sm
from . import symmetric_group as sg

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_GUARD = 3
EXIT_INVALID_MODEL = 4
EXIT_POSTSELECT = 5

# dense spectra/plots beyond this many bits switch to banded output
DENSE_OUTPUT_MAX_N = 20


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _dataset(path: str) -> sm.Dataset:
    return parse_dataset(_read_bytes(path))


def _theta(value: float, hi: float = 1.0) -> float:
    if not (0.0 <= value <= hi):
        raise UsageError(f"--theta must lie in [0, {hi}]")
    return value


# -- commands ------------------------------------------------------------------


def cmd_spectrum(args) -> int:
    X = _dataset(args.input)
    n = X.n
    if n <= DENSE_OUTPUT_MAX_N:
        spec = fourier(sm.empirical_distribution(X)).values.real
        ks = np.arange(2**n)
        if args.band is not None:
            ks = ks[weights(GroupSpec.boolean(n)) <= args.band]
        entries = [(int(k), float(spec[k])) for k in ks]
    else:
        band = 2 if args.band is None else args.band
        model = sm.sparse_model(X, sm.OrderDecay(0.0), band)
        entries = [(k, v.real) for k, v in model.retained()]
        if args.top is None:
            args.top = 100
    if args.top is not None:
        if args.top < 1:
            raise UsageError("--top must be positive")
        # largest magnitude first; ties keep (order, frequency) order
        ranked = sorted(entries, key=lambda kv: (-round(abs(kv[1]), 12), int(kv[0]).bit_count(), kv[0]))
        entries = ranked[: args.top]
    _write(args.out, spectrum_file(entries, n))
    return EXIT_OK


def cmd_smooth(args) -> int:
    X = _dataset(args.input)
    theta = _theta(args.theta)
    g = sm.OrderDecay(theta)
    meta = default_metadata("smooth", model="classical")
    if args.band is not None:
        if not 0 <= args.band <= X.n:
            raise UsageError(f"--band must lie in [0, {X.n}]")
        model = sm.sparse_model(X, g, args.band)
        mf = ModelFile.from_sparse(model, meta)
        probs = None
        if args.plot:
            if X.n > DENSE_OUTPUT_MAX_N:
                raise GuardError(f"plot data needs n <= {DENSE_OUTPUT_MAX_N}")
            probs = sm.sparse_dense_values(model)
    else:
        model = sm.smooth(X, g)
        probs = sm.as_distribution(model)
        mf = ModelFile(X.n, filter_to_json(g, X.n), X.digest(), probabilities=probs, metadata=meta)
    _write(args.out, mf.dumps())
    if args.plot:
        rows = [(i, bits_to_str(i, X.n), float(p)) for i, p in enumerate(probs)]
        _write(args.plot, write_csv(["index", "bitstring", "probability"], rows))
    return EXIT_OK


def _load_model(path: str) -> ModelFile:
    return ModelFile.loads(_read_bytes(path))


def cmd_sample(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be nonnegative")
    if args.kde:
        if args.model is not None or args.input is None or args.theta is None:
            raise UsageError("--kde needs --input and --theta and no --model")
        X = _dataset(args.input)
        bits = sm.kde_sample(X, _theta(args.theta), args.seed, args.count)
    else:
        if args.model is None or args.input is not None:
            raise UsageError("give exactly one of --model or --kde")
        mf = _load_model(args.model)
        if mf.is_dense:
            p = mf.probabilities
            neg = -p[p < 0].sum()
            if neg > CONFIG.clip_budget or abs(p.sum() - 1.0) > CONFIG.prob_sum_tol:
                raise NegativeMass(float(neg))
            bits = sm.sample_table(p, mf.n, args.seed, args.count)
        else:
            bits = sm.autoregressive_sample(mf.to_sparse(), args.seed, args.count)
    sys.stdout.write(format_samples(bits))
    return EXIT_OK


def cmd_qsmooth(args) -> int:
    X = _dataset(args.input)
    theta = _theta(args.theta, 0.5)
    if X.n > (CONFIG.max_qubits_override if guard_override() else CONFIG.max_qubits):
        raise GuardError(f"{X.n} qubits exceed the simulation limit")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        psi = qs.prepare_superposition(X)
    psi_hat = qs.walsh_qft(psi)
    closed = qs.decay_success_probability(psi_hat.amps, theta)
    report = qs.ancilla_decay_filter(psi_hat, theta)
    p = qs.born_distribution(qs.walsh_qft(report.state_after)).values.real
    meta = default_metadata("qsmooth", model="quantum", success_prob=report.success_prob)
    mf = ModelFile(X.n, {"type": "amplitude_order_decay", "theta": theta}, X.digest(), probabilities=p, metadata=meta)
    _write(args.out, mf.dumps())
    rep = {
        "n": X.n,
        "theta": theta,
        "unique_samples": int(np.count_nonzero(psi.amps)),
        "duplicates_collapsed": bool(caught),
        "success_prob": report.success_prob,
        "closed_form_success_prob": closed,
        "abs_difference": abs(report.success_prob - closed),
    }
    _write(args.report, json.dumps(rep, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.grid < 3:
        raise UsageError("--grid must be at least 3")
    train = _dataset(args.train)
    valid = _dataset(args.valid)
    if train.n != valid.n:
        raise ParseError("train and validation sets have different bit counts")
    theta, curve = sm.fit_theta(train, valid, args.grid)
    if args.out:
        _write(args.out, write_csv(["theta", "loglik"], [(float(t), float(v)) for t, v in curve]))
    sys.stdout.write(f"theta_star={theta!r}\n")
    return EXIT_OK


def _parse_eigs(text: str) -> tuple[float, ...]:
    if not text.strip():
        raise UsageError("--eigs needs a comma-separated list of eigenvalues")
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ParseError(f"cannot parse eigenvalues {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ParseError("eigenvalues must be finite")
    return vals


def _json_number(x: float):
    if abs(x - round(x)) == 0:
        return int(round(x))
    return x


def cmd_qnn_spectrum(args) -> int:
    if not args.eigs:
        raise UsageError("at least one --eigs list is required")
    gates = tuple(_parse_eigs(e) for e in args.eigs)
    omega = qs.qnn_frequency_set(qs.QnnEncodingSpec(gates))
    out = {"omega": [_json_number(w) for w in omega.frequencies], "integer_spectrum": omega.integer_spectrum}
    if args.demo_model:
        if any(len(g) != 2 for g in gates):
            raise UsageError("--demo-model needs two eigenvalues per gate (one qubit each)")
        if not omega.integer_spectrum:
            raise UsageError("--demo-model needs an integer frequency spectrum")
        n = len(gates)
        if 2**n > CONFIG.max_qnn_dim:
            raise GuardError(f"demo model with {n} qubits exceeds the QNN limit")
        rng = np.random.default_rng(args.seed)
        enc = []
        for q, eigs in enumerate(gates):
            v = unitary_group.rvs(2, random_state=rng)
            enc.append((q, v @ np.diag(eigs) @ v.conj().T))
        tr = tuple(unitary_group.rvs(2**n, random_state=rng) for _ in range(n + 1))
        obs = qs.PAULI_Z
        for _ in range(n - 1):
            obs = np.kron(np.eye(2), obs)
        model = qs.QnnModel(n, tuple(enc), tr, obs)
        kmax = args.kmax if args.kmax is not None else int(max(abs(w) for w in omega.frequencies)) + 2
        coeffs = qs.qnn_extract_spectrum(model, kmax)
        out_band = [abs(c) for k, c in coeffs.items() if k not in omega]
        out["kmax"] = kmax
        out["coefficients"] = {str(k): [c.real, c.imag] for k, c in sorted(coeffs.items())}
        out["max_out_of_band"] = max(out_band) if out_band else 0.0
    sys.stdout.write(json.dumps(out, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _parse_pattern(obj, n: int):
    if not isinstance(obj, list):
        raise ParseError("a pattern is a list of {objects, positions} blocks")
    blocks = []
    for block in obj:
        if not isinstance(block, dict) or set(block) != {"objects", "positions"}:
            raise ParseError("pattern blocks need exactly 'objects' and 'positions'")
        objs, poss = block["objects"], block["positions"]
        if not (isinstance(objs, list) and isinstance(poss, list)) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in objs + poss
        ):
            raise ParseError("pattern entries must be integer lists")
        blocks.append((tuple(objs), tuple(poss)))
    try:
        sg._parse_pattern(n, blocks)
    except ValueError as exc:
        raise ParseError(f"malformed pattern: {exc}") from None
    return blocks


def _json_arg(text: str, what: str):
    try:
        return json.loads(text)
    except ValueError:
        raise ParseError(f"{what} is not valid JSON") from None


def cmd_sn(args) -> int:
    n = args.n
    if n < 1:
        raise UsageError("--n must be positive")
    steps_obj = _json_arg(args.steps, "--steps")
    if not isinstance(steps_obj, list):
        raise ParseError("--steps must be a JSON list")
    raw_steps = []
    for st in steps_obj:
        if not isinstance(st, dict) or len(st) != 1:
            raise ParseError('each step is {"diffuse": p} or {"condition": pattern}')
        (kind, val), = st.items()
        if kind == "diffuse":
            if not isinstance(val, (int, float)) or isinstance(val, bool) or not 0 <= val <= 1:
                raise ParseError("diffuse probability must be a number in [0, 1]")
            raw_steps.append(("diffuse", float(val)))
        elif kind == "condition":
            raw_steps.append(("condition", _parse_pattern(val, n)))
        else:
            raise ParseError(f"unknown step {kind!r}")
    marginals = [_parse_pattern(_json_arg(m, "--marginal"), n) for m in args.marginal or []]
    only_diffuse = all(k == "diffuse" for k, _ in raw_steps)
    cap = CONFIG.sn_transform_override_max if guard_override() else CONFIG.sn_transform_max
    if n > CONFIG.sn_hard_max or (n > cap and not only_diffuse):
        raise GuardError(f"S_{n} exceeds the size guard")
    steps = [
        sg.Diffuse(v) if k == "diffuse" else sg.Condition(sg.pattern_indicator(n, v))
        for k, v in raw_steps
    ]
    dist = sg.markov_model(n, steps)
    report = {
        "n": n,
        "marginals": [
            {
                "pattern": [{"objects": list(o), "positions": list(p)} for o, p in m],
                "probability": sg.marginal_pattern(dist, m),
            }
            for m in marginals
        ],
    }
    sys.stdout.write(json.dumps(report, indent=1, sort_keys=True) + "\n")
    if args.out:
        rows = [(",".join(map(str, p)), float(v)) for p, v in zip(sg.enumerate_perms(n), np.real(dist.values))]
        _write(args.out, write_csv(["permutation", "probability"], rows))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectra", description="Spectral smoothing models over discrete groups.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="empirical Walsh spectrum of a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--top", type=int)
    p.add_argument("--band", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("smooth", help="order-decay smoothing model")
    p.add_argument("--input", required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--band", type=int, help="keep only frequencies up to this order (sparse model)")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="CSV with index,bitstring,probability")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("sample", help="draw samples from a model or the noise-kernel KDE")
    p.add_argument("--model")
    p.add_argument("--kde", action="store_true")
    p.add_argument("--input")
    p.add_argument("--theta", type=float)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("qsmooth", help="simulated quantum smoothing pipeline")
    p.add_argument("--input", required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_qsmooth)

    p = sub.add_parser("fit", help="fit theta by held-out likelihood")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--grid", type=int, default=11)
    p.add_argument("--out", help="CSV of (theta, loglik)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("qnn-spectrum", help="frequency set of a QNN encoding")
    p.add_argument("--eigs", action="append", help="comma-separated eigenvalues of one encoding gate")
    p.add_argument("--demo-model", action="store_true")
    p.add_argument("--kmax", type=int)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_qnn_spectrum)

    p = sub.add_parser("sn", help="diffusion/conditioning model over permutations")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--steps", default="[]")
    p.add_argument("--marginal", action="append")
    p.add_argument("--out", help="CSV of the full distribution")
    p.set_defaults(func=cmd_sn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spectra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"spectra: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GuardError as exc:
        print(f"spectra: size guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (NegativeMass, NegativeConditional, ZeroPosteriorMass, NormalizationError) as exc:
        print(f"spectra: invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID_MODEL
    except ZeroSuccessProbability as exc:
        print(f"spectra: postselection failed: {exc}", file=sys.stderr)
        return EXIT_POSTSELECT
    except (ValueError, OSError) as exc:
        # argument values rejected by the library, unwritable output paths
        print(f"spectra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
