"""Command-line interface.

Subcommands: ``basis``, ``count``, ``augment``, ``net init-stats``,
``net verify``, ``net demo-train``, ``robot verify``.  Exit codes are a
stable contract: 0 success, 1 verification failure, 2 usage or I/O error.
Reports go to stdout as text; ``--json`` additionally writes a machine
report next to the output file (or to stdout when there is no output file).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import augment as aug
from . import basis as bas
from . import nets, rigid
from .errors import RoboSymError
from .groups import (
    load_representation,
    load_representation_pair,
    tiled_regular_representation,
)

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _emit(args, report: dict, out_path: str | None) -> None:
    if not getattr(args, "json", False):
        return
    payload = json.dumps(report, indent=1, sort_keys=True) + "\n"
    if out_path:
        _atomic_write_text(str(out_path) + ".report.json", payload)
    else:
        sys.stdout.write(payload)


def _load_rep_pair(args):
    if args.rep_out and args.rep_out != args.rep_in:
        return load_representation_pair(args.rep_in, args.rep_out)
    _, rep_in = load_representation(args.rep_in)
    return rep_in, rep_in


def cmd_basis(args) -> int:
    rep_in, rep_out = _load_rep_pair(args)
    basis = bas.orbit_basis(rep_in, rep_out)
    _atomic_write_text(args.out, json.dumps(bas.basis_to_dict(basis)) + "\n")
    report = {
        "m": basis.m,
        "n": basis.n,
        "rank": basis.rank,
        "zero_forced": len(basis.zero_forced),
        "out": args.out,
    }
    print(f"wrote basis of rank {basis.rank} ({basis.m}x{basis.n}, "
          f"{len(basis.zero_forced)} zero-forced orbit(s)) to {args.out}")
    code = EXIT_OK
    if args.oracle:
        oracle = bas.dense_nullspace_oracle(rep_in, rep_out, tol=args.tol)
        _atomic_write_text(
            args.out + ".oracle.json",
            json.dumps(bas.oracle_to_dict(oracle, basis.m, basis.n)) + "\n",
        )
        residual = bas.span_residual(basis, oracle)
        rank_b = bas.burnside_rank(rep_in, rep_out)
        agree = basis.rank == oracle.shape[1] == rank_b and residual < args.tol
        report.update(
            {
                "oracle_rank": oracle.shape[1],
                "burnside_rank": rank_b,
                "span_residual": residual,
                "oracle_agrees": agree,
            }
        )
        print(
            f"oracle rank {oracle.shape[1]} = {basis.rank} (burnside {rank_b}), "
            f"span residual {residual:.3e}"
        )
        if not agree:
            print("oracle DISAGREES with orbit basis")
            code = EXIT_VERIFY_FAIL
    _emit(args, report, args.out)
    return code


def cmd_count(args) -> int:
    rep_in, rep_out = _load_rep_pair(args)
    r = bas.burnside_rank(rep_in, rep_out)
    mn = rep_in.dim * rep_out.dim
    print(f"r={r} mn={mn} ratio={r / mn}")
    _emit(args, {"rank": r, "mn": mn, "ratio": r / mn}, None)
    return EXIT_OK


def _compile_from_files(args):
    bundle = aug.load_group_bundle(args.group)
    raw_fields = aug.load_schema(args.schema)
    schema = aug.resolve_schema(
        raw_fields, bundle.joint_rep, bundle.isometries, bundle.leg_perm
    )
    plan = aug.compile_schema(
        schema, bundle.group, bundle.joint_rep, bundle.isometries, bundle.leg_perm
    )
    return bundle, schema, plan


def cmd_augment(args) -> int:
    bundle, schema, plan = _compile_from_files(args)
    names, rows = aug.read_csv(args.infile)
    expected = schema.column_names()
    if names != expected:
        raise RoboSymError(
            f"CSV header does not match schema: got {names[:4]}..., expected {expected[:4]}..."
        )
    if args.orbit_average:
        out_rows = aug.orbit_average(plan, rows)
        action = "orbit-averaged"
    else:
        out_rows = aug.augment_dataset(plan, rows)
        action = "augmented"
    lines = [",".join(expected)]
    lines += [",".join(f"{v:.17g}" for v in row) for row in out_rows]
    _atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"{action} {rows.shape[0]} rows into {out_rows.shape[0]} (group order "
          f"{bundle.group.order}) -> {args.out}")
    _emit(
        args,
        {
            "rows_in": int(rows.shape[0]),
            "rows_out": int(out_rows.shape[0]),
            "group_order": bundle.group.order,
            "mode": action,
        },
        args.out,
    )
    return EXIT_OK


def _build_net_from_spec(path: str) -> nets.EquivNet:
    with open(path) as f:
        try:
            spec = json.load(f)
        except json.JSONDecodeError as exc:
            raise RoboSymError(f"{path}: invalid JSON: {exc}") from exc
    base = Path(path).parent
    _, rep_in = load_representation(str(base / spec["rep"]))
    out_spec = spec.get("output", "input")
    if out_spec == "input":
        rep_out = rep_in
    else:
        rep_out = tiled_regular_representation(rep_in.group, int(out_spec))
    return nets.build_mlp(
        rep_in,
        rep_out,
        spec.get("hidden", []),
        nets.get_nonlinearity(spec.get("nonlinearity", "relu")),
        spec.get("init_mode", "fan_in"),
        rng_seed=int(spec.get("seed", 0)),
    )


def cmd_net(args) -> int:
    if args.action == "init-stats":
        _, rep = load_representation(args.group)
        profile = nets.activation_variance_profile(
            args.depth,
            args.width,
            rep.group,
            nets.get_nonlinearity(args.nonlinearity),
            args.mode if args.const_var is None else args.const_var,
            batch=args.batch,
            rng_seed=args.seed,
        )
        print("layer  std(pre-activation)")
        for i, s in enumerate(profile):
            print(f"{i + 1:5d}  {s:.6f}")
        ratio = float(profile[-1] / profile[0])
        print(f"std(last)/std(first) = {ratio:.4f}")
        _emit(args, {"profile": profile.tolist(), "ratio": ratio}, None)
        return EXIT_OK

    if args.action == "verify":
        net = _build_net_from_spec(args.net_spec)
        nets.load_weights(net, args.weights)
        rep = nets.check_equivariance(net, samples=args.samples, tol=args.tol, rng_seed=args.seed)
        print(str(rep))
        _emit(
            args,
            {
                "passed": rep.passed,
                "max_violation": rep.max_violation,
                "element": rep.worst_element,
                "sample": rep.worst_sample,
            },
            None,
        )
        return EXIT_OK if rep.passed else EXIT_VERIFY_FAIL

    if args.action == "demo-train":
        net = _build_net_from_spec(args.net_spec)
        rng = np.random.default_rng(args.seed)
        teacher = _build_net_from_spec(args.net_spec)
        for layer in teacher.layers:
            layer.coeffs = rng.standard_normal(layer.coeffs.shape) * 0.7
        x = rng.standard_normal((args.batch, net.input_dim))
        target, _ = nets.forward(teacher, x)

        def loss_and_grads():
            y, _ = nets.forward(net, x)
            diff = y - target
            loss = float((diff**2).mean())
            grads = nets.grad_coeffs(net, x, 2.0 * diff / diff.size)
            return loss, grads

        loss0, _ = loss_and_grads()
        for _ in range(args.steps):
            _, grads = loss_and_grads()
            for layer, g in zip(net.layers, grads):
                layer.coeffs = layer.coeffs - args.lr * g.coeffs
                layer.bias_coeffs = layer.bias_coeffs - args.lr * g.bias_coeffs
        loss1, _ = loss_and_grads()
        print(f"loss {loss0:.6f} -> {loss1:.6f} after {args.steps} gradient steps")
        if args.out:
            nets.save_weights(net, args.out)
            print(f"wrote weights to {args.out}")
        _emit(args, {"loss_initial": loss0, "loss_final": loss1, "steps": args.steps}, args.out)
        return EXIT_OK if loss1 < loss0 else EXIT_VERIFY_FAIL

    raise RoboSymError(f"unknown net action {args.action!r}")


def cmd_robot(args) -> int:
    tree = rigid.load_robot(args.robot)
    candidates = rigid.load_candidates(args.candidates, tree)
    report = rigid.identify_dms(
        tree, candidates, samples=args.samples, tol=args.tol, rng_seed=args.seed
    )
    print(str(report))
    _emit(
        args,
        {
            "candidates": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "dynamic_violation": c.dynamic_violation,
                    "kinematic_violation": c.kinematic_violation,
                    "mass_matrix_violation": c.mass_matrix_violation,
                    "failed_check": c.failed_check,
                }
                for c in report.candidates
            ],
            "verified": report.verified,
            "group_order": report.group.order,
        },
        None,
    )
    all_ok = all(c.passed for c in report.candidates)
    return EXIT_OK if all_ok else EXIT_VERIFY_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robosym", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("basis", help="compute the equivariant linear-map basis")
    b.add_argument("--rep-in", required=True)
    b.add_argument("--rep-out", default=None)
    b.add_argument("--out", required=True)
    b.add_argument("--oracle", action="store_true", help="cross-check with the dense nullspace")
    b.add_argument("--tol", type=float, default=1e-10)
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_basis)

    c = sub.add_parser("count", help="count trainable parameters of an equivariant layer")
    c.add_argument("--rep-in", required=True)
    c.add_argument("--rep-out", default=None)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_count)

    a = sub.add_parser("augment", help="augment a CSV dataset with its symmetric copies")
    a.add_argument("--group", required=True)
    a.add_argument("--schema", required=True)
    a.add_argument("--in", dest="infile", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--orbit-average", action="store_true",
                   help="symmetrize g-major target blocks instead of augmenting")
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_augment)

    n = sub.add_parser("net", help="equivariant network tools")
    nsub = n.add_subparsers(dest="action", required=True)

    ns = nsub.add_parser("init-stats", help="activation variance profile per layer")
    ns.add_argument("--group", required=True)
    ns.add_argument("--depth", type=int, default=20)
    ns.add_argument("--width", type=int, default=256)
    ns.add_argument("--nonlinearity", default="relu")
    ns.add_argument("--mode", default="fan_in", choices=["fan_in", "fan_out"])
    ns.add_argument("--const-var", type=float, default=None,
                    help="override the mode with a constant coefficient variance")
    ns.add_argument("--batch", type=int, default=256)
    ns.add_argument("--seed", type=int, default=0)
    ns.add_argument("--json", action="store_true")
    ns.set_defaults(func=cmd_net)

    nv = nsub.add_parser("verify", help="check equivariance of a weights file")
    nv.add_argument("--net-spec", required=True)
    nv.add_argument("--weights", required=True)
    nv.add_argument("--samples", type=int, default=64)
    nv.add_argument("--tol", type=float, default=1e-10)
    nv.add_argument("--seed", type=int, default=0)
    nv.add_argument("--json", action="store_true")
    nv.set_defaults(func=cmd_net)

    nd = nsub.add_parser("demo-train", help="tiny gradient-descent regression demo")
    nd.add_argument("--net-spec", required=True)
    nd.add_argument("--steps", type=int, default=200)
    nd.add_argument("--lr", type=float, default=0.05)
    nd.add_argument("--batch", type=int, default=64)
    nd.add_argument("--seed", type=int, default=0)
    nd.add_argument("--out", default=None)
    nd.add_argument("--json", action="store_true")
    nd.set_defaults(func=cmd_net)

    r = sub.add_parser("robot", help="robot symmetry certification")
    rsub = r.add_subparsers(dest="action", required=True)
    rv = rsub.add_parser("verify", help="verify candidate symmetries of a robot description")
    rv.add_argument("--robot", required=True)
    rv.add_argument("--candidates", required=True)
    rv.add_argument("--samples", type=int, default=100)
    rv.add_argument("--tol", type=float, default=1e-8)
    rv.add_argument("--seed", type=int, default=0)
    rv.add_argument("--json", action="store_true")
    rv.set_defaults(func=cmd_robot)

    return p


def _validate(args) -> None:
    tol = getattr(args, "tol", None)
    if tol is not None and tol <= 0:
        raise RoboSymError("--tol must be positive")
    samples = getattr(args, "samples", None)
    if samples is not None and samples < 1:
        raise RoboSymError("--samples must be >= 1")
    for attr in ("rep_in", "rep_out", "group", "schema", "infile", "net_spec",
                 "weights", "robot", "candidates"):
        path = getattr(args, attr, None)
        if path is not None and not os.path.exists(path):
            raise RoboSymError(f"input file not found: {path}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
        return args.func(args)
    except (RoboSymError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
