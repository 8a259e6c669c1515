"""Command-line front end.

One command per process, plain-text output: tables as CSV, structured
results as JSON (``--pretty`` to indent).  Exit codes are stable so shell
pipelines can branch on them:

    0  success
    1  usage error (bad flags, unknown command)
    2  input could not be parsed (missing file, malformed FCIDUMP/CSV/JSON)
    3  numerical failure or refused computation (cap exceeded, solver error,
       empty postselection)

Every command accepts ``--seed`` (64-bit), ``--threads`` (worker cap,
``QPREP_THREADS`` as fallback) and ``--config FILE`` with ``key=value``
lines mirroring the command's own flags; explicit flags win over the file.
A run is fully described by its RunConfig — reruns with identical flags,
seed and input files produce byte-identical output.

Heavy imports happen inside the handlers so the thread cap can be exported
before numpy first loads.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

# Exception type names (checked against the full MRO) that mean the inputs
# parsed fine but the computation itself failed or was refused.  Name-based
# so the classifier never has to import numpy.
_NUMERICAL_NAMES = frozenset({
    "DigitCapExceeded",
    "DimensionCapExceeded",
    "BudgetExceeded",
    "TermBudgetExceeded",
    "DegenerateWindow",
    "PosteriorUndefined",
    "SolverFailure",
    "LinAlgError",
})

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")

_INPUT_DESTS = frozenset({"input", "fcidump", "sos", "ham", "state",
                          "levels", "config", "h6"})
_OUTPUT_DESTS = frozenset({"out", "report", "sidecar", "posterior_out"})
_BOOKKEEPING_DESTS = frozenset({"handler", "command", "mode", "run_config"})


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run: command, flags, seed, io paths.

    Two invocations with equal RunConfigs (and equal input file contents)
    write byte-identical primary output; nothing else — time, host,
    environment — leaks in.
    """

    command: tuple
    flags: tuple
    seed: int
    inputs: tuple
    outputs: tuple

    @classmethod
    def from_args(cls, command, args):
        flags, inputs, outputs = [], [], []
        for dest, value in sorted(vars(args).items()):
            if dest in _BOOKKEEPING_DESTS or value is None:
                continue
            if dest in _INPUT_DESTS:
                inputs.append((dest, str(value)))
            elif dest in _OUTPUT_DESTS:
                outputs.append((dest, str(value)))
            elif dest != "seed":
                if isinstance(value, list):
                    value = tuple(value)
                flags.append((dest, value))
        return cls(tuple(command), tuple(flags),
                   int(getattr(args, "seed", 0)),
                   tuple(inputs), tuple(outputs))


# ---------------------------------------------------------------------------
# Small argument/IO helpers
# ---------------------------------------------------------------------------

def _seed_value(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed {text!r} is not an integer")
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _int_list(text):
    try:
        return [int(tok, 0) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a comma-separated integer list")


def _write_text(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit_json(obj, args, path=None):
    indent = 2 if getattr(args, "pretty", False) else None
    text = json.dumps(obj, indent=indent, sort_keys=True,
                      allow_nan=False) + "\n"
    _write_text(text, path if path is not None else getattr(args, "out", None))


def _emit_csv(header, rows, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _write_text(buf.getvalue(), path)


def _apply_threads(args):
    n = getattr(args, "threads", None)
    if n is None:
        env = os.environ.get("QPREP_THREADS")
        if not env:
            return
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"QPREP_THREADS={env!r} is not an integer")
    if n < 1:
        raise ValueError("thread count must be >= 1")
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


# ---------------------------------------------------------------------------
# Config files: key=value lines mirroring the command's flags
# ---------------------------------------------------------------------------

def _read_config(path):
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(
                    f"{path}:{line_no}: expected key=value, got {line!r}")
            mapping[key.strip().replace("-", "_")] = value.strip()
    return mapping


def _apply_config(subparser, mapping):
    actions = {a.dest: a for a in subparser._actions}
    for key, text in mapping.items():
        if key in ("help", "config"):
            raise ValueError(f"config key {key!r} is not settable from a file")
        action = actions.get(key)
        if action is None:
            raise ValueError(f"unknown config key {key!r}")
        if action.nargs == 0:
            value = text.lower() in ("1", "true", "yes", "on")
        elif isinstance(action.nargs, int) and action.nargs > 1:
            parts = text.split()
            if len(parts) != action.nargs:
                raise ValueError(
                    f"config key {key!r} needs {action.nargs} values")
            conv = action.type or str
            value = [conv(p) for p in parts]
        else:
            value = (action.type or str)(text)
        action.required = False  # the config supplies it
        subparser.set_defaults(**{key: value})


def _preapply_config(argv, registry):
    """Fold ``--config FILE`` into the target subparser's defaults.

    Runs before parse_args so explicit command-line flags still override
    whatever the file sets.
    """
    cfg_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            cfg_path = argv[i + 1]
            break
        if tok.startswith("--config="):
            cfg_path = tok.split("=", 1)[1]
            break
    if cfg_path is None:
        return
    path = ()
    for tok in argv:
        if tok.startswith("-"):
            break
        path += (tok,)
        if len(path) == 2:
            break
    while path and path not in registry:
        path = path[:-1]
    if not path:
        return  # let argparse produce the usage error
    _apply_config(registry[path], _read_config(cfg_path))


# ---------------------------------------------------------------------------
# Shared spectrum loading
# ---------------------------------------------------------------------------

def _add_common(sp, out=True):
    sp.add_argument("--seed", type=_seed_value, default=0,
                    help="64-bit RNG seed; equal seeds give equal bytes")
    sp.add_argument("--threads", type=int, metavar="N",
                    help="cap numeric worker threads "
                         "(falls back to QPREP_THREADS)")
    sp.add_argument("--config", metavar="FILE",
                    help="key=value defaults for this command's flags")
    sp.add_argument("--pretty", action="store_true",
                    help="indent JSON output")
    if out:
        sp.add_argument("--out", metavar="FILE",
                        help="write the primary output here instead of "
                             "stdout")


def _add_measure_args(sp):
    sp.add_argument("--gaussian", nargs=2, type=float,
                    metavar=("MEAN", "SIGMA"),
                    help="discretized normal energy distribution "
                         "(normalized frame)")
    sp.add_argument("--levels", metavar="CSV",
                    help="energy,weight rows; weights are renormalized")
    sp.add_argument("--ham", metavar="FILE",
                    help="Hamiltonian (.npz or .csv); the spectrum is "
                         "affinely mapped into the readout frame")
    sp.add_argument("--state", metavar="CSV",
                    help="with --ham: amplitude rows re[,im]; "
                         "default is the uniform state")
    sp.add_argument("--n-levels", type=int, default=4096, metavar="N",
                    help="discretization levels for --gaussian "
                         "(default 4096)")


def _load_state_vector(path, dim):
    import numpy as np

    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    if rows.shape[1] == 1:
        vec = rows[:, 0].astype(complex)
    elif rows.shape[1] == 2:
        vec = rows[:, 0] + 1j * rows[:, 1]
    else:
        raise ValueError("state file needs one or two columns (re[,im])")
    if vec.shape[0] != dim:
        raise ValueError(
            f"state has {vec.shape[0]} amplitudes, Hamiltonian dim is {dim}")
    return vec


def _hamiltonian_measure(args):
    """Load --ham (+ optional --state), normalize, take the exact measure."""
    import numpy as np

    from .hamiltonian import load_hamiltonian, normalize_spectrum
    from .spectra import exact_spectral_measure

    h = load_hamiltonian(args.ham)
    h_norm, normalizer = normalize_spectrum(h)
    if args.state is not None:
        psi = _load_state_vector(args.state, h.dim)
    else:
        psi = np.full(h.dim, h.dim ** -0.5)
    return h_norm, psi, exact_spectral_measure(h_norm, psi, normalizer)


def _load_measure(args):
    """Build the SpectralMeasure a command works on.

    Exactly one of --gaussian/--levels/--ham must be given.  The --ham
    route normalizes the spectrum and records the affine map on the
    returned measure, so original units stay recoverable.
    """
    import numpy as np

    chosen = [name for name in ("gaussian", "levels", "ham")
              if getattr(args, name) is not None]
    if len(chosen) != 1:
        raise ValueError(
            "pick exactly one spectrum source: --gaussian, --levels or --ham")
    if args.gaussian is not None:
        from .refine import gaussian_levels

        mean, sigma = args.gaussian
        return gaussian_levels(mean, sigma, n_levels=args.n_levels)
    if args.levels is not None:
        from .spectra import SpectralMeasure

        rows = np.loadtxt(args.levels, delimiter=",", ndmin=2)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ValueError("levels file needs energy,weight columns")
        energies, inverse = np.unique(rows[:, 0], return_inverse=True)
        weights = np.zeros(energies.shape)
        np.add.at(weights, inverse, rows[:, 1])
        total = weights.sum()
        if total <= 0:
            raise ValueError("level weights must have a positive total")
        return SpectralMeasure(list(zip(energies, weights / total)))
    return _hamiltonian_measure(args)[2]


# ---------------------------------------------------------------------------
# Command handlers (heavy imports stay local)
# ---------------------------------------------------------------------------

def cmd_compress(args):
    from .gf2 import compress

    with open(args.input, encoding="utf-8") as fh:
        dets = [line.strip() for line in fh
                if line.strip() and not line.lstrip().startswith("#")]
    if not dets:
        raise ValueError(f"{args.input}: no determinant bitstrings found")
    smap = compress(dets, check=args.check)
    _emit_json(json.loads(smap.to_json()), args)
    return EXIT_OK


def cmd_estimate_cost(args):
    from .resources import cost_sweep

    det_counts = args.d_values or []
    chi_values = args.chi_values or []
    if not det_counts and not chi_values:
        raise ValueError("give --d-values and/or --chi-values to sweep")
    rows = cost_sweep(args.n_spatial, det_counts=det_counts,
                      chi_values=chi_values, d=args.local_dim,
                      b=args.rotation_bits, n_sites=args.n_sites)
    _emit_csv(("param", "method", "toffoli", "clean_qubits", "dirty_qubits"),
              [(r["param"], r["method"], r["toffoli"],
                r["clean_qubits"], r["dirty_qubits"]) for r in rows],
              args.out)
    return EXIT_OK


def cmd_ham_build(args):
    from .hamiltonian import build_ci_matrix, parse_fcidump, save_hamiltonian

    with open(args.fcidump, encoding="utf-8") as fh:
        fd = parse_fcidump(fh.read())
    h = build_ci_matrix(fd, args.na, args.nb, dim_cap=args.dim_cap)
    save_hamiltonian(h, args.out)
    _emit_json({"n_orbitals": fd.n_orb, "n_alpha": args.na,
                "n_beta": args.nb, "dim": h.dim,
                "matrix": args.out}, args, path="-")
    return EXIT_OK


def cmd_convert(args):
    from .states import (load_mps, load_sos, mps_to_sos, save_mps, save_sos,
                         sos_to_mps)

    if args.to == "mps":
        state = load_sos(args.input)
        mps, fidelity = sos_to_mps(state, chi_max=args.chi_max)
        save_mps(mps, args.out)
        summary = {"to": "mps", "n_sites": len(mps.tensors),
                   "max_bond": max(t.shape[2] for t in mps.tensors),
                   "fidelity": float(fidelity), "output": args.out}
    else:
        mps = load_mps(args.input)
        state = mps_to_sos(mps, threshold=args.threshold,
                           term_budget=args.term_budget)
        save_sos(state, args.out)
        summary = {"to": "sos", "n_terms": len(state.terms),
                   "output": args.out}
    _emit_json(summary, args, path="-")
    return EXIT_OK


def cmd_simulate_encode(args):
    from .encodesim import simulate_sos_encoding
    from .states import load_sos

    state = load_sos(args.sos).normalize()
    res = simulate_sos_encoding(state)
    report = {
        "n_system": res.n_system,
        "n_enumeration": res.n_enumeration,
        "n_identification": res.n_identification,
        "n_qubits": res.n_qubits,
        "fidelity": float(res.fidelity),
        "ancilla_residual": float(res.ancilla_residual),
        "gate_tallies": {"cnots_applied": res.n_cnots_applied,
                         "uncompute_ops": res.n_uncompute_ops},
    }
    _emit_json(report, args, path=args.report)
    return EXIT_OK


def cmd_energy_dist(args):
    import numpy as np

    from .spectra import (MomentSet, coarse_qpe_sample, default_grid,
                          gram_charlier, kde, moments_from_measure,
                          resolvent_distribution)

    grid = default_grid(args.grid_points)
    if args.method == "resolvent":
        if args.ham is None:
            raise ValueError("--method resolvent needs --ham")
        h_norm, psi, measure = _hamiltonian_measure(args)
        grid, values = resolvent_distribution(h_norm, psi, args.eta,
                                              grid=grid)
    else:
        measure = _load_measure(args)
        if args.method == "series":
            ms = moments_from_measure(measure, args.order)
            density = gram_charlier(ms, args.order)
            values = density(grid)
        else:  # cqpe
            samples = coarse_qpe_sample(measure, args.k, args.shots,
                                        args.seed)
            grid, values = kde(samples, bandwidth=2.0 ** -args.k, grid=grid)

    normalizer = measure.normalizer
    if normalizer is not None:
        # Report in the Hamiltonian's original units: map the grid back and
        # scale the density by the Jacobian of the affine map.
        grid_out = normalizer.invert(grid)
        values_out = values * normalizer.scale
    else:
        grid_out, values_out = grid, values
    _emit_csv(("E", "P"),
              [(repr(float(e)), repr(float(p)))
               for e, p in zip(grid_out, values_out)],
              args.out)

    if args.sidecar is not None:
        if normalizer is None:
            frame = "readout"
            ms = moments_from_measure(measure, args.order)
        else:
            frame = "original"
            energies = normalizer.invert(measure.energies)
            ms = MomentSet.from_raw(
                [float(np.dot(measure.probs, energies ** n))
                 for n in range(args.order + 1)])
        sidecar = {
            "method": args.method,
            "frame": frame,
            "raw_moments": [float(m) for m in ms.raw],
            "mean": float(ms.mean),
            "sigma": float(ms.sigma),
            "cumulants": (None if ms.kappa is None
                          else [float(k) for k in ms.kappa]),
            "energy_map": (None if normalizer is None else
                           {"scale": float(normalizer.scale),
                            "shift": float(normalizer.shift)}),
        }
        _emit_json(sidecar, args, path=args.sidecar)
    return EXIT_OK


def cmd_qpe_stats(args):
    from .qpestats import cdf_below, expected_min, qpe_outcome_distribution

    measure = _load_measure(args)
    dist = qpe_outcome_distribution(measure, args.k)
    report = {
        "k": args.k,
        "outcomes": 2 ** args.k,
        "mean_readout": float(dist.energies @ dist.probs),
    }
    if args.target is not None:
        report["target"] = args.target
        report["outcome_p_below"] = float(dist.cdf_below(args.target))
        report["spectral_p_below"] = float(cdf_below(measure, args.target))
    if args.reps is not None:
        report["reps"] = args.reps
        report["expected_min"] = float(expected_min(measure, args.reps))
    if args.full:
        report["distribution"] = [
            [int(x), float(e), float(p)]
            for x, (e, p) in enumerate(zip(dist.energies, dist.probs))]
    _emit_json(report, args)
    return EXIT_OK


def cmd_goldilocks(args):
    from .qpestats import goldilocks_report

    measure = _load_measure(args)
    report = goldilocks_report(measure, args.et, args.budget,
                               easy_threshold=args.easy_threshold)
    _emit_json(report.as_dict(), args)
    return EXIT_OK


def cmd_leakage(args):
    from .leakage import (LeakageSetup, diagnose_leakage, leak_prob_approx,
                          leak_prob_exact, leak_prob_integral)

    measure = _load_measure(args)
    setup = LeakageSetup(args.k, args.epsilon, args.e0)
    integral = None
    if args.gaussian is not None:
        # A smooth source admits the integral form of the estimate too.
        from scipy import stats

        mean, sigma = args.gaussian
        density = stats.norm(loc=mean, scale=sigma).pdf
        integral = float(leak_prob_integral(
            density, setup, e_max=min(1.0, mean + 8 * sigma)))
    diagnosis = diagnose_leakage(measure, args.k, args.reps,
                                 flag_factor=args.flag_factor)
    _emit_json({
        "k": args.k,
        "epsilon": args.epsilon,
        "e0": args.e0,
        "exact": float(leak_prob_exact(measure, setup)),
        "approx": float(leak_prob_approx(measure, setup)),
        "integral": integral,
        "diagnosis": diagnosis.as_dict(),
    }, args)
    return EXIT_OK


def _posterior_csv(result, path):
    _emit_csv(("E", "weight"),
              [(repr(float(e)), repr(float(p)))
               for e, p in result.posterior.levels],
              path)


def cmd_refine_cqpe(args):
    from .qpestats import cdf_below
    from .refine import coarse_qpe_postselect

    measure = _load_measure(args)
    result = coarse_qpe_postselect(measure, args.k, set(args.accept))
    report = {
        "k": args.k,
        "accepted": sorted({x % 2 ** args.k for x in args.accept}),
        "success_prob": float(result.success_prob),
        "query_cost": result.query_cost,
        "posterior_mean": float(result.posterior.mean()),
    }
    if args.et is not None:
        report["p_below_target"] = float(
            cdf_below(result.posterior, args.et))
    if args.posterior_out is not None:
        _posterior_csv(result, args.posterior_out)
    _emit_json(report, args)
    return EXIT_OK


def cmd_refine_qetu(args):
    from .hamiltonian import AffineNormalizer
    from .qpestats import cdf_below
    from .refine import qetu_filter, qetu_params, symmetric_filter

    measure = _load_measure(args)
    lo = float(measure.energies.min())
    hi = float(measure.energies.max())
    margin = args.angle_margin
    if not 0 < margin < math.pi / 2:
        raise ValueError("--angle-margin must lie in (0, pi/2)")
    if hi > lo:
        scale = (math.pi - 2 * margin) / (hi - lo)
    else:
        scale = 1.0  # single level; any positive slope works
    angle_map = AffineNormalizer(scale, -math.pi + margin - scale * lo)
    mu, k_steep = qetu_params(float(angle_map.apply(args.el)),
                              float(angle_map.apply(args.eu)),
                              zeta=args.zeta)
    poly = symmetric_filter(k_steep, mu, args.degree, zeta=args.zeta)
    result = qetu_filter(measure, poly, angle_map=angle_map)
    report = {
        "el": args.el,
        "eu": args.eu,
        "degree": args.degree,
        "mu": float(mu),
        "k_steep": float(k_steep),
        "success_prob": float(result.success_prob),
        "query_cost": result.query_cost,
        "posterior_mean": float(result.posterior.mean()),
    }
    if args.et is not None:
        report["p_below_target"] = float(
            cdf_below(result.posterior, args.et))
    if args.posterior_out is not None:
        _posterior_csv(result, args.posterior_out)
    _emit_json(report, args)
    return EXIT_OK


def cmd_refine_case_study(args):
    from .refine import gaussian_case_study

    report = gaussian_case_study(n_levels=args.n_levels)
    _emit_json(report.as_dict(), args)
    return EXIT_OK


def cmd_reproduce(args):
    from . import acceptance

    # Stable lines (no timings) so a rerun is byte-identical.
    all_passed = True
    lines = []
    for check in acceptance.CHECKS:
        result = check()
        all_passed &= result.passed
        lines.append("[%s] %2d %-24s %s" % (
            "PASS" if result.passed else "FAIL",
            result.number, result.name, result.detail))
    _write_text("".join(line + "\n" for line in lines), args.out)
    if args.h6 is not None:
        with open(args.h6, encoding="utf-8") as fh:
            protocol = acceptance.h6_protocol_report(fh.read())
        _emit_json(protocol, args, path="-")
    return EXIT_OK if all_passed else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# Parser construction and dispatch
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="qprep",
        description="Sum-of-Slaters / MPS state preparation toolkit: "
                    "compression, cost models, CI Hamiltonians, encoding "
                    "simulation, energy distributions and refinement.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    registry = {}

    def add(name, handler, help_text, measure=False, out=True):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        registry[(name,)] = sp
        if handler is not None:
            sp.set_defaults(handler=handler)
            if measure:
                _add_measure_args(sp)
            _add_common(sp, out=out)
        return sp

    sp = add("compress", cmd_compress,
             "GF(2) signature compression of determinant bitstrings")
    sp.add_argument("--input", required=True, metavar="FILE",
                    help="one occupation bitstring per line")
    sp.add_argument("--check", action="store_true",
                    help="verify signature distinctness before emitting")

    sp = add("estimate-cost", cmd_estimate_cost,
             "Toffoli/qubit cost sweep for the encoding methods")
    sp.add_argument("--n-spatial", type=int, required=True, metavar="N",
                    help="spatial orbital count")
    sp.add_argument("--d-values", type=_int_list, metavar="D1,D2,...",
                    help="determinant counts for the basic/compressed rows")
    sp.add_argument("--chi-values", type=_int_list, metavar="X1,X2,...",
                    help="bond dimensions for the MPS rows")
    sp.add_argument("--local-dim", type=int, default=4, metavar="d",
                    help="MPS local dimension (default 4)")
    sp.add_argument("--rotation-bits", type=int, default=10, metavar="b",
                    help="bits per synthesized rotation (default 10)")
    sp.add_argument("--n-sites", type=int, metavar="L",
                    help="MPS site count (default: one per spatial orbital)")

    sp = add("ham", None, "CI Hamiltonian construction")
    ham_sub = sp.add_subparsers(dest="mode", metavar="MODE")
    sp = ham_sub.add_parser(
        "build", help="build a sector CI matrix from an FCIDUMP file",
        description="Parse an FCIDUMP file and assemble the dense CI matrix "
                    "of one (n_alpha, n_beta) sector.")
    registry[("ham", "build")] = sp
    sp.set_defaults(handler=cmd_ham_build)
    sp.add_argument("--fcidump", required=True, metavar="FILE")
    sp.add_argument("--na", type=int, required=True, help="alpha electrons")
    sp.add_argument("--nb", type=int, required=True, help="beta electrons")
    sp.add_argument("--out", required=True, metavar="FILE",
                    help="matrix output (.npz, or .csv for plain text)")
    sp.add_argument("--dim-cap", type=int, default=4096, metavar="N",
                    help="refuse sectors larger than this (default 4096)")
    _add_common(sp, out=False)

    sp = add("convert", cmd_convert,
             "convert between sum-of-Slaters and MPS state files",
             out=False)
    sp.add_argument("--input", required=True, metavar="FILE")
    sp.add_argument("--to", required=True, choices=("mps", "sos"))
    sp.add_argument("--out", required=True, metavar="FILE",
                    help="converted state output (JSON for sos, .npz "
                         "for mps)")
    sp.add_argument("--chi-max", type=int, default=64, metavar="X",
                    help="bond-dimension cap for --to mps (default 64)")
    sp.add_argument("--threshold", type=float, default=1e-10,
                    help="amplitude cutoff for --to sos (default 1e-10)")
    sp.add_argument("--term-budget", type=int, default=1_000_000,
                    help="refuse extractions beyond this many terms")

    sp = add("simulate-encode", cmd_simulate_encode,
             "simulate the enumeration-register encoding of a state")
    sp.add_argument("--sos", required=True, metavar="FILE",
                    help="sum-of-Slaters JSON input")
    sp.add_argument("--report", metavar="FILE",
                    help="write the JSON report here (default stdout)")

    sp = add("energy-dist", cmd_energy_dist,
             "energy distribution of a state: moment series, resolvent "
             "scan, or sampled coarse readout", measure=True)
    sp.add_argument("--method", required=True,
                    choices=("series", "resolvent", "cqpe"))
    sp.add_argument("--order", type=int, default=8, metavar="N",
                    help="moment order for the series and sidecar "
                         "(default 8)")
    sp.add_argument("--eta", type=float, default=0.01,
                    help="resolvent broadening (default 0.01)")
    sp.add_argument("--k", type=int, default=6,
                    help="readout digits for cqpe (default 6)")
    sp.add_argument("--shots", type=int, default=4096,
                    help="cqpe sample count (default 4096)")
    sp.add_argument("--grid-points", type=int, default=512, metavar="N",
                    help="energy grid resolution (default 512)")
    sp.add_argument("--sidecar", metavar="FILE",
                    help="write moments/cumulants JSON here")

    sp = add("qpe-stats", cmd_qpe_stats,
             "exact k-digit readout statistics of a spectrum", measure=True)
    sp.add_argument("--k", type=int, required=True, help="readout digits")
    sp.add_argument("--target", type=float, metavar="E",
                    help="report P(readout <= E) and P(spectrum <= E)")
    sp.add_argument("--reps", type=int, metavar="K",
                    help="report the expected minimum of K readouts")
    sp.add_argument("--full", action="store_true",
                    help="include the full outcome table")

    sp = add("goldilocks", cmd_goldilocks,
             "classify a target energy as easy / Goldilocks / out of reach",
             measure=True)
    sp.add_argument("--et", type=float, required=True, metavar="E",
                    help="target energy (readout frame)")
    sp.add_argument("--budget", type=int, required=True, metavar="K",
                    help="repetition budget")
    sp.add_argument("--easy-threshold", type=float, default=0.5,
                    help="single-shot hit probability above which the "
                         "target counts as easy (default 0.5)")

    sp = add("leakage", cmd_leakage,
             "probability of readouts below the tolerated-error window",
             measure=True)
    sp.add_argument("--k", type=int, required=True, help="readout digits")
    sp.add_argument("--epsilon", type=float, required=True,
                    help="tolerated energy error")
    sp.add_argument("--e0", type=float, default=0.0,
                    help="reference ground energy (default 0)")
    sp.add_argument("--reps", type=int, default=10,
                    help="repetitions for the diagnosis (default 10)")
    sp.add_argument("--flag-factor", type=float, default=2.0,
                    help="readout/energy CDF ratio that raises the flag")

    sp = add("refine", None, "posterior refinement of a prepared state")
    ref_sub = sp.add_subparsers(dest="mode", metavar="MODE")

    sp = ref_sub.add_parser(
        "cqpe", help="postselect on accepted coarse-readout outcomes",
        description="Bayesian update of the spectrum after postselecting "
                    "a set of k-digit readout outcomes.")
    registry[("refine", "cqpe")] = sp
    sp.set_defaults(handler=cmd_refine_cqpe)
    _add_measure_args(sp)
    sp.add_argument("--k", type=int, required=True, help="readout digits")
    sp.add_argument("--accept", type=_int_list, required=True,
                    metavar="X1,X2,...", help="accepted register outcomes")
    sp.add_argument("--et", type=float, metavar="E",
                    help="also report posterior weight at or below E")
    sp.add_argument("--posterior-out", metavar="FILE",
                    help="write the posterior levels as CSV")
    _add_common(sp)

    sp = ref_sub.add_parser(
        "qetu", help="apply an erf-style symmetric filter window",
        description="Filter the spectrum with a Chebyshev approximation of "
                    "a symmetric erf window over [el, eu], mapped onto the "
                    "QETU angle interval.")
    registry[("refine", "qetu")] = sp
    sp.set_defaults(handler=cmd_refine_qetu)
    _add_measure_args(sp)
    sp.add_argument("--el", type=float, required=True,
                    help="window lower edge (readout frame)")
    sp.add_argument("--eu", type=float, required=True,
                    help="window upper edge (readout frame)")
    sp.add_argument("--degree", type=int, default=200,
                    help="polynomial degree (default 200)")
    sp.add_argument("--zeta", type=float, default=1.0,
                    help="steepness softening factor (default 1)")
    sp.add_argument("--angle-margin", type=float, default=0.1,
                    help="gap kept between the mapped spectrum and the "
                         "angle-interval ends (default 0.1)")
    sp.add_argument("--et", type=float, metavar="E",
                    help="also report posterior weight at or below E")
    sp.add_argument("--posterior-out", metavar="FILE",
                    help="write the posterior levels as CSV")
    _add_common(sp)

    sp = ref_sub.add_parser(
        "case-study", help="run the bundled Gaussian refinement case study",
        description="Re-derive the twelve reference numbers of the bundled "
                    "Gaussian refinement walkthrough and report each "
                    "comparison.")
    registry[("refine", "case-study")] = sp
    sp.set_defaults(handler=cmd_refine_case_study)
    sp.add_argument("--n-levels", type=int, default=4096, metavar="N",
                    help="discretization levels (default 4096)")
    _add_common(sp)

    sp = add("reproduce", cmd_reproduce,
             "re-derive every headline number and print pass/fail lines")
    sp.add_argument("--h6", metavar="FCIDUMP",
                    help="also run the six-orbital chain protocol on this "
                         "FCIDUMP file and print its JSON report")

    return parser, registry


def dispatch(argv=None):
    """Run one command; returns the process exit code."""
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, registry = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        _preapply_config(argv, registry)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors.
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    command = tuple(tok for tok in (args.command, getattr(args, "mode", None))
                    if tok)
    args.run_config = RunConfig.from_args(command, args)
    try:
        _apply_threads(args)
        return handler(args)
    except Exception as exc:  # noqa: BLE001 - single classification point
        print(f"error: {exc}", file=sys.stderr)
        mro_names = {cls.__name__ for cls in type(exc).__mro__}
        if mro_names & _NUMERICAL_NAMES:
            return EXIT_NUMERICAL
        if isinstance(exc, (OSError, ValueError, KeyError)):
            return EXIT_INPUT
        return EXIT_NUMERICAL


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
