"""Command-line front end.

Exit codes: 0 success, 1 a verified invariant failed or a computation
raised, 2 configuration error, 3 the ball exceeded its cap.  Outputs are
collected in memory and written once at the end, so a failing run leaves no
partial files behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import linalg, suites
from .config import ConfigError, ExperimentConfig, load_config
from .orbit import CapExceededError, enumerate_ball, limit_set_sample, regularity_report
from .patterson import critical_exponent, patterson_measure, quasi_invariance_report
from .weyl import Theta

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3
log = logging.getLogger("horops")


class _Outputs:
    """Files to be written once the command has finished."""

    def __init__(self):
        self.files: dict[str, str] = {}

    def json(self, name: str, obj) -> None:
        self.files[name] = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"

    def csv(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.files[name] = buf.getvalue()

    def write(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            tmp = out_dir / (name + ".tmp")
            tmp.write_text(text)
            os.replace(tmp, out_dir / name)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v)}")


def _f(x) -> str:
    return repr(float(x))


def _ball(cfg: ExperimentConfig, threads: int, with_annotations: bool = True):
    P, theta, phi = cfg.build()
    orbit = enumerate_ball(P, cfg.ball.max_word_length, dedup_tol=cfg.ball.dedup_tol, cap=cfg.ball.cap,
                           threads=threads, theta=theta if with_annotations else None,
                           phi=phi if with_annotations else None)
    return orbit, theta, phi


def _orbit_rows(orbit):
    margin = orbit.theta_margin
    phil = orbit.phi_length
    for i in range(len(orbit)):
        yield ([orbit.word_label(i), int(orbit.length[i])] + [_f(v) for v in orbit.kappa[i]]
               + [_f(margin[i]), _f(phil[i])])


def cmd_orbit(cfg, args, out: _Outputs) -> int:
    orbit, theta, _ = _ball(cfg, args.threads)
    header = ["word", "word_length"] + [f"kappa_{i + 1}" for i in range(orbit.d)] + ["theta_margin", "phi_length"]
    out.csv("orbit.csv", header, _orbit_rows(orbit))
    out.json("regularity.json", {"group": cfg.group_name, "elements": len(orbit),
                                 "max_word_length": orbit.max_word_length,
                                 "regularity": regularity_report(orbit, theta).as_dict()})
    return EXIT_OK


def cmd_exponent(cfg, args, out: _Outputs) -> int:
    orbit, _, phi = _ball(cfg, args.threads)
    est = critical_exponent(orbit, phi)
    d = est.as_dict()
    d.update(group=cfg.group_name, elements=len(orbit), max_word_length=orbit.max_word_length)
    if est.bisection is not None and est.bisection > 0:
        d["relative_disagreement"] = abs(est.delta_hat - est.bisection) / est.bisection
    out.json("exponent.json", d)
    return EXIT_OK


def _measure_s(cfg, orbit, phi) -> tuple[float, float | None]:
    if cfg.measure.s is not None:
        return cfg.measure.s, None
    delta = critical_exponent(orbit, phi, cross_check=False).delta_hat
    return max(delta, 0.0) + cfg.measure.s_offset, delta


def cmd_measure(cfg, args, out: _Outputs) -> int:
    orbit, theta, phi = _ball(cfg, args.threads)
    s, delta = _measure_s(cfg, orbit, phi)
    mu = patterson_measure(orbit, phi, s, cfg.measure.h_mode)
    gens = [orbit.index_of_word((c,)) for c in range(0, orbit.presentation.n_letters, 2)]
    qi = quasi_invariance_report(mu, [g for g in gens if g >= 0], theta)
    w = mu.weights
    out.csv("measure.csv", ["word", "word_length", "phi_length", "weight"],
            ([orbit.word_label(int(i)), int(orbit.length[i]), _f(phi(orbit.kappa[i])), _f(w[j])]
             for j, i in enumerate(mu.atoms)))
    out.json("measure.json", {"group": cfg.group_name, "s": s, "delta_hat": delta, "h_mode": cfg.measure.h_mode,
                              "atoms": int(len(mu.atoms)), "quasi_invariance": qi.as_dict()})
    return EXIT_OK


def cmd_shadow_lemma(cfg, args, out: _Outputs) -> int:
    P, theta, phi = cfg.build()
    sl = cfg.shadow_lemma
    rep = suites.shadow_lemma_suite(P, theta, phi, cfg.ball.max_word_length, sl.compare_word_length, sl.R,
                                    sl.lengths, sl.per_length, s=cfg.measure.s, s_offset=cfg.measure.s_offset,
                                    seed=cfg.seed, dedup_tol=cfg.ball.dedup_tol, cap=cfg.ball.cap,
                                    threads=args.threads)
    out.csv("shadow_lemma.csv", ["word", "phi_length", "shadow_mass", "ratio"],
            ([w, _f(t), _f(m), _f(r)] for w, t, m, r in rep.pop("rows")))
    out.json("shadow_lemma.json", rep)
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def _run_suite(cfg, args) -> dict:
    P, theta, phi = cfg.build()
    suite = args.suite
    if suite == "embedding":
        d = P.dim
        thetas = [Theta(d, (k,)) for k in range(1, d)] + [Theta.full(d)]
        return suites.embedding_suite(d, thetas, seed=cfg.seed)
    if suite == "shadows":
        orbit, theta, _ = _ball(cfg, args.threads)
        rep = suites.endpoint_suite(orbit, theta, cfg.shadows.R_grid)
        rep["group"] = cfg.group_name
        return rep
    if suite == "shadow-lemma":
        sl = cfg.shadow_lemma
        if len(P.generators) == 1:
            orbit, theta, phi = _ball(cfg, args.threads)
            s, _ = _measure_s(cfg, orbit, phi)
            return suites.cyclic_shadow_lemma_suite(orbit, theta, phi, s, sl.R, sl.lengths, seed=cfg.seed)
        return suites.shadow_lemma_suite(P, theta, phi, cfg.ball.max_word_length, sl.compare_word_length, sl.R,
                                         sl.lengths, sl.per_length, s=cfg.measure.s, s_offset=cfg.measure.s_offset,
                                         seed=cfg.seed, dedup_tol=cfg.ball.dedup_tol, cap=cfg.ball.cap,
                                         threads=args.threads)
    if suite == "axioms":
        orbit, theta, phi = _ball(cfg, args.threads)
        return suites.axioms_suite(orbit, theta, phi, cfg.shadows.R_grid, s=cfg.measure.s,
                                   s_offset=cfg.measure.s_offset, h_mode=cfg.measure.h_mode, seed=cfg.seed)
    if suite == "example59":
        orbit, theta, _ = _ball(cfg, args.threads)
        sh = cfg.shadows
        return suites.example59_suite(orbit, theta, sh.margin_floor, sh.conical_R, sh.min_chain, sh.directions,
                                      seed=cfg.seed)
    raise ValueError(f"unknown suite {suite!r}")


def cmd_verify(cfg, args, out: _Outputs) -> int:
    rep = _run_suite(cfg, args)
    out.json(f"verify_{args.suite}.json", rep)
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def _line_coordinates(frame, k: int) -> np.ndarray:
    v = linalg.wedge_of_columns(frame[:, :k])
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    v = -v if nz.size and v[nz[0]] < 0 else v
    return v + 0.0


def cmd_limit_set(cfg, args, out: _Outputs) -> int:
    orbit, theta, _ = _ball(cfg, args.threads)
    flags, idx = limit_set_sample(orbit, theta, cfg.shadows.margin_floor)
    d = orbit.d
    header = ["word", "word_length", "theta_margin"]
    for k in theta.indices:
        header += [f"line{k}_{j}" for j in range(len(linalg.wedge_basis(d, k)))]
    rows = []
    for x, i in zip(flags, idx):
        row = [orbit.word_label(int(i)), int(orbit.length[i]), _f(orbit.theta_margin[i])]
        for k in theta.indices:
            row += [_f(c) for c in _line_coordinates(x.frame, k)]
        rows.append(row)
    out.csv("limit_set.csv", header, rows)
    return EXIT_OK


COMMANDS = {
    "orbit": cmd_orbit,
    "exponent": cmd_exponent,
    "measure": cmd_measure,
    "shadow-lemma": cmd_shadow_lemma,
    "verify": cmd_verify,
    "limit-set": cmd_limit_set,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="horops", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config path, or builtin:<name> for a shipped example")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        if name == "verify":
            sp.add_argument("--suite", required=True, choices=suites.SUITES)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must fit in an unsigned 64-bit integer")
            cfg = cfg.model_copy(update={"seed": args.seed})
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = _Outputs()
    try:
        code = COMMANDS[args.command](cfg, args, out)
    except CapExceededError as exc:
        log.error("%s", exc)
        return EXIT_CAP
    except Exception as exc:  # reported, not re-raised: the exit code carries the outcome
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAIL
    out.write(Path(args.out))
    return code


if __name__ == "__main__":
    sys.exit(main())
