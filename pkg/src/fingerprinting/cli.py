"""Command-line front end: bounds, constructions, oracle scans, frame checks, simulations.

Reports go to stdout, diagnostics to stderr.  Exit codes: 0 ok, 1 a
consistency check failed, 2 bad input or budget refusal.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from . import classical, oracle, quantum, sim
from .strategy import ErrorProfile, error_profile, from_json, is_one_sided, to_json

PROTOCOLS = ("grouping", "permuted-grouping", "semiclassical-grouping", "quantum-basis", "quantum-frame")
CLASSICAL = PROTOCOLS[:3]

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    n: int | None = None
    m: int | None = None
    m_alice: int | None = None
    m_bob: int | None = None
    protocol: str | None = None
    rounds: int | None = None
    seed: int = 0
    output: str = "json"
    budget: int = oracle.DEFAULT_BUDGET

    def alphabets(self) -> tuple[int, int]:
        ma = self.m_alice if self.m_alice is not None else self.m
        mb = self.m_bob if self.m_bob is not None else self.m
        if ma is None or mb is None:
            raise InputError("give --m, or both --m-alice and --m-bob")
        return ma, mb

    def validate(self) -> "RunConfig":
        for name in ("n", "m", "m_alice", "m_bob"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise InputError(f"--{name.replace('_', '-')} must be >= 1")
        if self.protocol is not None:
            if self.protocol not in PROTOCOLS:
                raise InputError(f"unknown protocol {self.protocol!r}")
            if self.n is None or self.m is None:
                raise InputError(f"protocol {self.protocol} needs --n and --m")
            if self.protocol == "quantum-basis" and self.n > self.m**2:
                raise InputError(f"quantum-basis is the error-free regime n <= m**2; got n={self.n}, m={self.m}")
            if self.protocol == "quantum-frame" and self.n < self.m**2:
                raise InputError(f"quantum-frame needs the frame regime n >= m**2; got n={self.n}, m={self.m}")
        if self.subcommand == "simulate" and (self.rounds is None or self.rounds < 1):
            raise InputError("--rounds must be a positive integer")
        if self.output not in ("json", "csv"):
            raise InputError("--output must be json or csv")
        return self


def _q(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


def _rational(v: Fraction) -> dict:
    return {"value": _q(v), "float": float(v)}


def _emit(doc, fmt: str, *, rows: list[dict] | None = None) -> None:
    if fmt == "json":
        click.echo(json.dumps(doc, indent=2, sort_keys=False))
        return
    rows = rows if rows is not None else [{"key": k, "value": v} for k, v in _flatten(doc)]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    click.echo(buf.getvalue(), nl=False)


def _flatten(doc, prefix=""):
    if isinstance(doc, dict):
        for k, v in doc.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(doc, list):
        yield prefix.rstrip("."), json.dumps(doc)
    else:
        yield prefix.rstrip("."), doc


def _finish(ok: bool) -> None:
    if not ok:
        click.echo("consistency check failed", err=True)
        sys.exit(EXIT_INVARIANT)


def _guard(fn):
    """Map input errors and budget refusals onto exit code 2."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (InputError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except oracle.BudgetExceeded as exc:
            click.echo(f"refused: {exc}", err=True)
            sys.exit(EXIT_INPUT)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def bound_row(n: int, m: int) -> dict:
    c = classical.classical_bound(n, m)
    s = classical.semiclassical_bound(n, m)
    qv = quantum.theorem6_error(n, m)
    return {
        "n": n,
        "m": m,
        "classical": _q(c),
        "semiclassical": _q(s),
        "quantum": _q(qv),
        "classical_float": float(c),
        "semiclassical_float": float(s),
        "quantum_float": float(qv),
    }


def _bound_consistent(n: int, m: int) -> bool:
    c = classical.classical_bound(n, m)
    return (
        c == classical.exact_permuted_error(n, m)
        and quantum.theorem6_error(n, m) <= classical.semiclassical_bound(n, m) <= c
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log diagnostics to stderr.")
def main(verbose: bool):
    """Fingerprinting protocols in the simultaneous-message-passing model."""
    if verbose:
        import logging

        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr)


n_opt = click.option("--n", type=int, help="Number of messages.")
m_opt = click.option("--m", type=int, help="Fingerprint alphabet size (or Hilbert-space dimension).")
output_opt = click.option("--output", type=click.Choice(["json", "csv"]), default="json", show_default=True)
protocol_opt = click.option("--protocol", type=click.Choice(PROTOCOLS))


@main.command()
@n_opt
@m_opt
@click.option("--sweep", is_flag=True, help="Emit the grid m = 1..M, n = m..N (see --m-max/--n-max).")
@click.option("--m-max", type=int, default=6, show_default=True)
@click.option("--n-max", type=int, default=36, show_default=True)
@output_opt
@_guard
def bound(n, m, sweep, m_max, n_max, output):
    """Classical, semiclassical and quantum worst-case error side by side."""
    if sweep:
        rows = [bound_row(nn, mm) for mm in range(1, m_max + 1) for nn in range(mm, n_max + 1)]
        ok = all(_bound_consistent(r["n"], r["m"]) for r in rows)
        _emit({"rows": rows}, output, rows=rows)
    else:
        RunConfig("bound", n=n, m=m, output=output).validate()
        if n is None or m is None:
            raise InputError("give --n and --m, or --sweep")
        row = bound_row(n, m)
        ok = _bound_consistent(n, m)
        _emit(row, output, rows=[row])
    _finish(ok)


def _classical_triple(protocol: str, n: int, m: int):
    if protocol == "grouping":
        return classical.grouping_strategy(n, m)
    if protocol == "permuted-grouping":
        return classical.permuted_grouping(n, m)
    return classical.semiclassical_grouping(n, m)


@main.command()
@protocol_opt
@n_opt
@m_opt
@output_opt
@_guard
def construct(protocol, n, m, output):
    """Dump a protocol: strategy JSON for classical ones, frame matrices for quantum ones."""
    cfg = RunConfig("construct", n=n, m=m, protocol=protocol, output=output).validate()
    if cfg.protocol is None:
        raise InputError("--protocol is required")
    if cfg.protocol in CLASSICAL:
        click.echo(json.dumps(to_json(_classical_triple(cfg.protocol, n, m))))
        return
    frame = quantum.utof_frame(m * m, m) if cfg.protocol == "quantum-basis" else quantum.utof_frame(n, m)
    if cfg.protocol == "quantum-basis":
        frame = quantum.UnitaryFrame(n, m, frame.members[:n])
    if output == "csv":
        click.echo(quantum.frame_to_csv(frame), nl=False)
    else:
        click.echo(json.dumps(quantum.frame_to_json(frame)))


def _profile_doc(profile: ErrorProfile, one_sided: bool) -> dict:
    return {
        "n": profile.n,
        "wce": _rational(profile.wce),
        "ne": _rational(profile.ne),
        "one_sided": one_sided,
        "worst_pair": list(profile.worst_pair()),
        "pe": [[_q(v) for v in row] for row in profile.pe],
        "p1": [[_q(v) for v in row] for row in profile.p1],
    }


@main.command()
@protocol_opt
@n_opt
@m_opt
@click.option("--strategy", "strategy_file", type=click.Path(exists=True, dir_okay=False), help="Strategy JSON file.")
@output_opt
@_guard
def evaluate(protocol, n, m, strategy_file, output):
    """Exact error profile of a protocol or of a strategy file."""
    if strategy_file:
        triple = from_json(Path(strategy_file).read_text())
        profile = error_profile(triple)
        one_sided = is_one_sided(triple)
        doc = _profile_doc(profile, one_sided)
        pe_ok = all(profile.pe[x][x] == 1 - profile.p1[x][x] for x in range(profile.n))
        _emit(doc, output)
        _finish(pe_ok)
        return

    cfg = RunConfig("evaluate", n=n, m=m, protocol=protocol, output=output).validate()
    if cfg.protocol is None:
        raise InputError("give --protocol or --strategy")
    if cfg.protocol in CLASSICAL:
        groups = m * m if cfg.protocol == "semiclassical-grouping" else m
        if cfg.protocol != "grouping" and n > classical.ENUMERATION_CUTOFF:
            profile, one_sided, method = classical.permuted_profile(n, groups), True, "closed-form"
        else:
            triple = _classical_triple(cfg.protocol, n, m)
            profile, one_sided, method = error_profile(triple), is_one_sided(triple), "enumeration"
        doc = _profile_doc(profile, one_sided)
        doc["method"] = method
        if cfg.protocol == "grouping":
            expected = Fraction(classical.lemma3_bound(n, m))
            ok = one_sided and profile.ne == expected
            doc["expected_ne"] = _rational(expected)
        else:
            expected = classical.classical_bound(n, groups)
            ok = one_sided and profile.wce == expected and set(profile.unequal_errors()) <= {expected}
            doc["expected_wce"] = _rational(expected)
        _emit(doc, output)
        _finish(ok)
        return

    if cfg.protocol == "quantum-basis":
        res = quantum.theorem5_protocol(n, m)
        doc = {
            "n": n,
            "m": m,
            "error_free": res.error_free,
            "max_equal_deviation": res.max_equal_deviation,
            "max_unequal_acceptance": res.max_unequal_acceptance,
        }
        _emit(doc, output)
        _finish(res.error_free)
        return

    stats = quantum.theorem6_acceptance_stats(n, m)
    averaged = quantum.permutation_averaged_error(n, m)
    expected = quantum.theorem6_error(n, m)
    doc = {
        "n": n,
        "m": m,
        "mean_unequal_acceptance": stats.mean_unequal,
        "expected_mean": _rational(stats.expected_mean),
        "max_equal_deviation": stats.max_equal_deviation,
        "permutation_averaged_error": averaged,
        "wce": _rational(expected),
    }
    _emit(doc, output)
    _finish(stats.deviation <= 1e-9 and stats.max_equal_deviation <= 1e-12 and abs(averaged - float(expected)) <= 1e-9)


@main.command("brute-force")
@n_opt
@m_opt
@click.option("--m-alice", type=int)
@click.option("--m-bob", type=int)
@click.option("--budget", type=int, default=oracle.DEFAULT_BUDGET, show_default=True, help="Max pair evaluations.")
@click.option("--prune", is_flag=True, help="Scan only canonically labeled Alice functions.")
@click.option("--max-witnesses", type=int, default=16, show_default=True)
@output_opt
@_guard
def brute_force(n, m, m_alice, m_bob, budget, prune, max_witnesses, output):
    """Exhaustive minimum error mass over deterministic strategy pairs."""
    cfg = RunConfig("brute-force", n=n, m=m, m_alice=m_alice, m_bob=m_bob, budget=budget, output=output).validate()
    if n is None:
        raise InputError("--n is required")
    ma, mb = cfg.alphabets()
    report = oracle.exhaustive_min_ne(n, ma, mb, budget=budget, prune=prune, max_witnesses=max_witnesses)
    witnesses_ok = all(oracle.ne_of_deterministic(fp, fq) == report.min_ne for fp, fq in report.witnesses)
    _emit(report.to_json(), output)
    _finish(report.matches_bound and witnesses_ok)


@main.command("frame-verify")
@n_opt
@m_opt
@output_opt
@_guard
def frame_verify(n, m, output):
    """Unitarity, normalization and tight-frame potential of the unitary frame."""
    RunConfig("frame-verify", n=n, m=m, output=output).validate()
    if n is None or m is None:
        raise InputError("give --n and --m")
    frame = quantum.utof_frame(n, m)
    potential = frame.potential()
    rel = abs(potential - n * n) / (n * n)
    unit_err = frame.max_unitarity_error()
    doc = {
        "n": n,
        "m": m,
        "potential": potential,
        "expected_potential": n * n,
        "relative_error": rel,
        "max_unitarity_error": unit_err,
        "tight": rel <= 1e-6,
    }
    ok = rel <= 1e-6 and unit_err <= quantum.UNITARY_TOL
    if n == m * m:
        gram = frame.gram()
        off = np.abs(gram - m * np.eye(n)).max()
        doc["orthonormal"] = bool(off <= 1e-9)
        ok = ok and doc["orthonormal"]
    _emit(doc, output)
    _finish(ok)


@main.command()
@protocol_opt
@n_opt
@m_opt
@click.option("--rounds", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--adversary", default="worst-pair", show_default=True, help="worst-pair, uniform-unequal, uniform-all, equal-only, or scripted:x-y,x-y")
@click.option("--trace", "trace_file", type=click.Path(dir_okay=False), help="Write a per-round CSV trace here.")
@click.option("--trace-cap", type=int, default=10_000, show_default=True, help="Maximum trace rows.")
@output_opt
@_guard
def simulate(protocol, n, m, rounds, seed, adversary, trace_file, trace_cap, output):
    """Monte Carlo rounds reconciled with the exact error via a Hoeffding band."""
    cfg = RunConfig("simulate", n=n, m=m, protocol=protocol, rounds=rounds, seed=seed, output=output).validate()
    if cfg.protocol is None:
        raise InputError("--protocol is required")
    adv = sim.AdversaryModel.parse(adversary)
    cap = trace_cap if trace_file else 0
    if cfg.protocol in CLASSICAL:
        triple = _classical_triple(cfg.protocol, n, m)
        profile = None
        if cfg.protocol != "grouping" and n > classical.ENUMERATION_CUTOFF:
            groups = m * m if cfg.protocol == "semiclassical-grouping" else m
            profile = classical.permuted_profile(n, groups)
        report = sim.run_classical(triple, adv, rounds, seed, profile=profile, trace_cap=cap)
    else:
        report = sim.run_quantum(n, m, adv, rounds, seed, trace_cap=cap)
    if trace_file:
        Path(trace_file).write_text(sim.trace_to_csv(report.trace))
    doc = {"protocol": cfg.protocol, "n": n, "m": m, "adversary": adversary, **report.to_json()}
    _emit(doc, output)
    _finish(report.within_bound and report.false_negatives == 0)


if __name__ == "__main__":
    main()
