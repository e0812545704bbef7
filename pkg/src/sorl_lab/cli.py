"""Command line front end.

Subcommands: graph, embed, train, eval, perturb, toy-verify. A JSON config
file can supply any option; explicit flags override it. Numeric output files
are byte-stable for a fixed seed. Exit codes: 1 config problems, 2 numeric
failures, 3 I/O failures. SORL_LAB_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .clustering import KMeansConfig, evaluation_scores, partition_from_labels, seeded_kmeans
from .errors import ConfigError, NumericError, SorlLabError
from .graph import bundle_from_world, load_world, world_to_json
from .io_utils import fmt, write_json, write_matrix_csv, write_rows_csv, write_vector_csv
from .objective import (
    equivalence_offsets,
    matrix_form_offsets,
    norm_constant,
    offset_constant_direct,
    train_sorl,
)
from .perturbation import (
    analytic_derivative,
    check_assumptions,
    multi_label_sweep,
    setup_from_world,
    sweep,
    upsilon_sign_report,
)
from .spectral import (
    OptimizerConfig,
    eig_descending,
    lowrank_loss,
    minimize_lowrank,
    rank_k_truncation,
    topk_decompose,
)
from .toy import (
    BlockWorldParams,
    ToyParams,
    build_toy,
    labeled_fourth_closed_form,
    regime_triples,
    spectra_bound_report,
    synth_block_world,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_kv_floats(spec, aliases):
    out = {}
    for part in spec.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        key, val = part.split("=", 1)
        key = aliases.get(key.strip(), key.strip())
        try:
            out[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"bad float for {key!r}: {val!r}") from exc
    return out


def _toy_params(spec_or_dict):
    aliases = {"tauc": "tau_c", "taus": "tau_s", "tau0": "tau0"}
    vals = (
        dict(spec_or_dict)
        if isinstance(spec_or_dict, dict)
        else _parse_kv_floats(spec_or_dict, aliases)
    )
    vals = {aliases.get(k, k): float(v) for k, v in vals.items()}
    missing = {"tau1", "tau_c", "tau_s"} - set(vals)
    if missing:
        raise ConfigError(f"toy spec missing {sorted(missing)}")
    known = {"tau1", "tau_c", "tau_s", "tau0"}
    unknown = set(vals) - known
    if unknown:
        raise ConfigError(f"unknown toy keys {sorted(unknown)} (expected {sorted(known)})")
    return ToyParams(**vals)


def _block_params(spec_or_dict):
    obj = spec_or_dict
    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--block expects inline JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("block spec must be a JSON object")
    cross = {}
    for key, val in dict(obj.get("cross", {})).items():
        a, _, b = str(key).partition("-")
        try:
            cross[(int(a), int(b))] = float(val)
        except ValueError as exc:
            raise ConfigError(f"bad cross key {key!r} (want 'a-b')") from exc
    pool = obj.get("label_pool")
    try:
        params = BlockWorldParams(
            sizes=tuple(obj["sizes"]),
            within_pair=tuple(obj["within_pair"]),
            cross_pair=tuple(obj["cross_pair"]),
            cross=cross,
            pair_jitter=float(obj.get("pair_jitter", 0.0)),
            cross_jitter=float(obj.get("cross_jitter", 0.0)),
            label_block=int(obj.get("label_block", 0)),
            label_pool=tuple(pool) if pool is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad block spec: {exc!r}") from exc
    return params, int(obj.get("seed", 0))


def _load_config(path):
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON config: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return obj


def _merged(args, config, key, default=None):
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    return config.get(key, default)


def _resolve_world(args, config):
    toy = _merged(args, config, "toy")
    block = _merged(args, config, "block")
    path = _merged(args, config, "world")
    sources = [s for s in (toy, block, path) if s is not None]
    if len(sources) != 1:
        raise ConfigError("exactly one of --world, --toy, --block must be given")
    if toy is not None:
        return build_toy(_toy_params(toy)), "toy"
    if block is not None:
        params, seed = _block_params(block)
        return synth_block_world(params, seed=seed), "block"
    if not Path(path).exists():
        raise FileNotFoundError(f"world file not found: {path}")
    return load_world(path), "file"


def _out_dir(args, config):
    out = _merged(args, config, "out")
    if out is None:
        raise ConfigError("--out directory is required")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(**kv):
    for key, val in kv.items():
        if isinstance(val, (float, np.floating)):
            val = fmt(val)
        print(f"{key}={val}")


def _bundle(args, config, world):
    eta_u = float(_merged(args, config, "eta_u", 1.0))
    eta_l = float(_merged(args, config, "eta_l", 0.0))
    return bundle_from_world(world, eta_u, eta_l)


def _equivalence_lines(world, bundle, k, seed):
    """Constant-offset certificate between the factorization and five-term losses."""
    kk = min(max(1, k), world.augmented_count)
    const = norm_constant(bundle)
    direct = offset_constant_direct(bundle)
    if world.row_stochastic:
        offs = equivalence_offsets(world, bundle, k=kk, n_maps=3, seed=seed)
        basis = "five-term"
    else:
        offs = matrix_form_offsets(bundle, k=kk, n_maps=3, seed=seed)
        basis = "matrix-form"
    spread = float(np.ptp(offs))
    dev = float(np.max(np.abs(offs - const)))
    certified = spread <= 1e-7 * max(1.0, abs(const)) and dev <= 1e-7 * max(1.0, abs(const))
    _emit(
        equivalence_basis=basis,
        equivalence_rows_normalized=str(world.row_stochastic).lower(),
        equivalence_offset_spread=spread,
        equivalence_offset_vs_const=dev,
        equivalence_const=const,
        equivalence_const_direct_gap=abs(const - direct),
        equivalence_certified=str(certified).lower(),
    )


def cmd_graph(args, config):
    world, source = _resolve_world(args, config)
    bundle = _bundle(args, config, world)
    out = _out_dir(args, config)
    write_matrix_csv(out / "adjacency_unlabeled.csv", bundle.A_u)
    write_matrix_csv(out / "adjacency.csv", bundle.A)
    write_matrix_csv(out / "adjacency_normalized.csv", bundle.A_norm)
    write_vector_csv(out / "degrees.csv", bundle.degrees)
    for cid, vec in zip(world.labeled_classes, bundle.label_vectors):
        write_vector_csv(out / f"label_vector_{cid}.csv", vec)
    w, _ = eig_descending(bundle.A_norm)
    write_json(
        out / "spectrum.json",
        {
            "eigenvalues": w,
            "eta_u": bundle.eta_u,
            "eta_l": bundle.eta_l,
            "total_unlabeled_mass": float(bundle.A_u.sum()),
            "row_stochastic": world.row_stochastic,
        },
    )
    write_json(out / "world.json", world_to_json(world))
    if _merged(args, config, "plot", False):
        plotting.save_heatmap(out / "adjacency.png", bundle.A, "composed adjacency")
        plotting.save_heatmap(out / "adjacency_normalized.png", bundle.A_norm,
                              "normalized adjacency")
    _emit(source=source, n=world.augmented_count, lambda_max=w[0], out=out)


def cmd_embed(args, config):
    world, source = _resolve_world(args, config)
    bundle = _bundle(args, config, world)
    k = int(_merged(args, config, "k", 3))
    out = _out_dir(args, config)
    dec = topk_decompose(bundle, k)
    write_matrix_csv(out / "embedding.csv", dec.Z)
    write_json(
        out / "embedding.json",
        {
            "k": dec.k,
            "eigenvalues": dec.eigenvalues,
            "gap_abs": dec.gap_abs,
            "gap_ratio": dec.gap_ratio,
            "all_eigenvalues": dec.all_eigenvalues,
        },
    )
    seed = int(_merged(args, config, "seed", 0))
    _equivalence_lines(world, bundle, k, seed)
    if _merged(args, config, "plot", False):
        plotting.save_spectrum(out / "spectrum.png", dec.all_eigenvalues, k=k)
        labels = list(world.class_of) if world.natural_count == world.augmented_count else None
        plotting.save_embedding_scatter(out / "embedding.png", dec.Z, labels)
    _emit(source=source, k=k, gap_abs=dec.gap_abs, gap_ratio=dec.gap_ratio, out=out)


def cmd_train(args, config):
    world, source = _resolve_world(args, config)
    bundle = _bundle(args, config, world)
    k = int(_merged(args, config, "k", 3))
    out = _out_dir(args, config)
    opt_cfg = dict(config.get("optimizer", {}))
    for key in ("step", "max_iters", "tol"):
        val = getattr(args, key, None)
        if val is not None:
            opt_cfg[key] = val
    seed = int(_merged(args, config, "seed", 0))
    opt = OptimizerConfig(
        step=opt_cfg.get("step"),
        max_iters=int(opt_cfg.get("max_iters", 50000)),
        seed=int(opt_cfg.get("seed", seed)),
        tol=float(opt_cfg.get("tol", 1e-8)),
    )
    objective = _merged(args, config, "objective", "lowrank")
    if objective == "lowrank":
        F, trace = minimize_lowrank(bundle, k, opt, return_trace=True)
        Z = (1.0 / np.sqrt(bundle.degrees))[:, None] * F
    elif objective == "sorl":
        fmap, trace = train_sorl(world, bundle, k, opt, return_trace=True)
        Z = fmap.values
        F = fmap.scaled()
    else:
        raise ConfigError(f"unknown objective {objective!r} (want lowrank or sorl)")
    product_error = float(np.linalg.norm(F @ F.T - rank_k_truncation(bundle.A_norm, k)))
    write_matrix_csv(out / "embedding.csv", Z)
    write_rows_csv(out / "trace.csv", ["iteration", "loss", "grad_norm"], trace)
    write_json(
        out / "train.json",
        {
            "objective": objective,
            "k": k,
            "iterations": trace[-1][0],
            "final_loss": trace[-1][1],
            "final_grad_norm": trace[-1][2],
            "lowrank_loss": lowrank_loss(F, bundle),
            "product_error_vs_truncation": product_error,
            "seed": opt.seed,
        },
    )
    _equivalence_lines(world, bundle, k, seed)
    if _merged(args, config, "plot", False):
        plotting.save_trace(out / "trace.png", trace)
        labels = list(world.class_of) if world.natural_count == world.augmented_count else None
        plotting.save_embedding_scatter(out / "embedding.png", Z, labels)
    _emit(source=source, objective=objective, iterations=trace[-1][0],
          product_error=product_error, out=out)


def _partition_for(args, config, world):
    path = _merged(args, config, "partition")
    if path is not None:
        try:
            ids = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid partition JSON: {exc}") from exc
        if not isinstance(ids, list):
            raise ConfigError(f"{path}: partition file must hold a list of class ids")
        if len(ids) != world.augmented_count:
            raise ConfigError(
                f"partition file lists {len(ids)} ids for {world.augmented_count} vertices"
            )
        return partition_from_labels([str(c) for c in ids])
    if world.natural_count != world.augmented_count:
        raise ConfigError("world has M != N; pass --partition with per-vertex class ids")
    return partition_from_labels(list(world.class_of))


def cmd_eval(args, config):
    world, source = _resolve_world(args, config)
    bundle = _bundle(args, config, world)
    k = int(_merged(args, config, "k", 3))
    out = _out_dir(args, config)
    if world.natural_count != world.augmented_count:
        raise ConfigError("eval derives labeled rows from natural samples and needs M = N")
    partition = _partition_for(args, config, world)
    dec = topk_decompose(bundle, k)
    id_order = sorted(set(world.class_of))
    dense = {cid: i for i, cid in enumerate(id_order)}
    known = {}
    for cid in world.labeled_classes:
        support = np.where(world.P_l[cid] > 0)[0]
        known[dense[cid]] = support.tolist()
    opt = KMeansConfig(
        seed=int(_merged(args, config, "kmeans_seed", 0)),
        max_iters=int(_merged(args, config, "kmeans_max_iters", 300)),
        restarts=int(_merged(args, config, "restarts", 5)),
    )
    pred = seeded_kmeans(dec.Z, known, partition.class_count, opt)
    scores = evaluation_scores(dec.Z, partition, pred, sorted(known))
    write_rows_csv(
        out / "assignments.csv",
        ["index", "predicted", "truth"],
        [(i, int(p), int(t)) for i, (p, t) in enumerate(zip(pred, partition.labels))],
    )
    write_json(out / "scores.json", dict(scores, class_ids=id_order))
    _emit(source=source, accuracy_all=scores["accuracy_all"], kms=scores["kms"], out=out)


def cmd_perturb(args, config):
    world, source = _resolve_world(args, config)
    eta_u = float(_merged(args, config, "eta_u", 1.0))
    k = int(_merged(args, config, "k", 3))
    out = _out_dir(args, config)
    deltas = _merged(args, config, "deltas")
    if deltas is None:
        raise ConfigError("--deltas grid is required")
    if isinstance(deltas, str):
        deltas = [float(x) for x in deltas.split(",") if x.strip()]
    if not deltas:
        raise ConfigError("delta grid is empty")
    partition = _partition_for(args, config, world)
    mode = _merged(args, config, "analytic", "auto")
    if mode not in ("auto", "require", "off"):
        raise ConfigError(f"--analytic must be auto, require or off, got {mode!r}")
    threads = int(os.environ.get("SORL_LAB_THREADS", "1") or "1")
    if len(world.labeled_classes) != 1:
        # the rank-one analysis does not apply; measure columns only
        setup = None
        rows = multi_label_sweep(world, eta_u, k, partition, deltas)
        deriv_note = f"numeric sweep only: {len(world.labeled_classes)} labeled classes"
    else:
        setup = setup_from_world(world, eta_u, k, partition)
        if mode == "require":
            analytic_derivative(setup)  # raise with pair listing before sweeping
        rows, deriv_note = sweep(setup, deltas, max_workers=max(1, threads))
    if mode == "off":
        for row in rows:
            row["analytic_derivative"] = None
        deriv_note = "disabled"
    class_names = sorted(set(partition.labels.tolist()))
    header = ["delta", "m_kms", "delta_kms", "leading_term", "analytic_derivative"] + [
        f"dpc_{c}" for c in class_names
    ]
    csv_rows = [
        [row["delta"], row["m_kms"], row["delta_kms"], row["leading_term"],
         row["analytic_derivative"],
         *(row["per_class"] if row["per_class"] is not None else [None] * len(class_names))]
        for row in rows
    ]
    write_rows_csv(out / "sweep.csv", header, csv_rows)
    meta = {
        "eta_u": eta_u,
        "k": k,
        "m_kms_base": rows[0]["m_kms"] if rows[0]["delta"] == 0.0 else None,
        "analytic_note": deriv_note,
        "threads": threads,
    }
    if setup is not None:
        report = check_assumptions(setup)
        meta.update(
            m_kms_base=setup.m0,
            eta1=setup.eta1,
            eta2=setup.eta2,
            scale=setup.scale,
            uniform_degrees=setup.uniform_degrees,
            gap_ratio=report.gap_ratio,
            assumptions={
                "gap_ok": report.gap_ok,
                "span_residual": report.span_residual,
                "span_ok": report.span_ok,
                "constancy_spread": report.constancy_spread,
                "constancy_ok": report.constancy_ok,
            },
            upsilon_sign=upsilon_sign_report(setup),
        )
    write_json(out / "perturb.json", meta)
    if _merged(args, config, "plot", False):
        plotting.save_sweep(out / "sweep.png", rows)
    _emit(source=source, grid=len(rows), m_kms_base=meta["m_kms_base"],
          analytic=deriv_note if deriv_note in ("ok", "disabled") else "unavailable", out=out)


def cmd_toy_verify(args, config):
    out = _out_dir(args, config)
    count = int(_merged(args, config, "triples", 20))
    c = float(_merged(args, config, "bound_constant", 10.0))
    rows = []
    reports = []
    summary = {}
    for regime, labeled in (("labeled", True), ("unlabeled", False)):
        eig_pass = sin_pass = order_pass = 0
        for params in regime_triples(labeled, count):
            rep = spectra_bound_report(params, labeled=labeled, bound_constant=c)
            ordering = True
            if labeled:
                ordering = rep["closed_form"][2] > labeled_fourth_closed_form(params)
            rep["ordering_ok"] = ordering
            reports.append(rep)
            eig_pass += rep["eig_pass"]
            sin_pass += rep["sin_pass"]
            order_pass += ordering
            rows.append(
                [regime, params.tau1, params.tau_c, params.tau_s,
                 *rep["eigenvalues"], *rep["closed_form"], max(rep["eig_gaps"]),
                 rep["eig_bound"], rep["eig_pass"], rep["sin_distance"],
                 rep["sin_bound"], rep["sin_pass"], ordering]
            )
        summary[regime] = {
            "triples": count,
            "eig_pass": eig_pass,
            "sin_pass": sin_pass,
            "ordering_pass": order_pass,
        }
    header = ["regime", "tau1", "tau_c", "tau_s", "lam1", "lam2", "lam3",
              "hat1", "hat2", "hat3", "max_eig_gap", "eig_bound", "eig_pass",
              "sin_distance", "sin_bound", "sin_pass", "ordering_ok"]
    write_rows_csv(out / "bounds.csv", header, rows)
    write_json(out / "bounds.json", {"bound_constant": c, "summary": summary})
    if _merged(args, config, "plot", False):
        plotting.save_bound_curves(out / "bounds.png", reports)
    for regime, stats in summary.items():
        _emit(**{
            f"{regime}_eig_pass": f"{stats['eig_pass']}/{stats['triples']}",
            f"{regime}_sin_pass": f"{stats['sin_pass']}/{stats['triples']}",
            f"{regime}_ordering_pass": f"{stats['ordering_pass']}/{stats['triples']}",
        })
    _emit(bound_constant=c, out=out)


def build_parser():
    parser = _Parser(prog="sorl-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_k=True):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--world", help="world definition JSON file")
        p.add_argument("--toy", help="toy parameters, e.g. tau1=0.95,tauc=0.03,taus=0.02")
        p.add_argument("--block", help="block world parameters as inline JSON")
        p.add_argument("--eta-u", type=float, dest="eta_u")
        p.add_argument("--eta-l", type=float, dest="eta_l")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--plot", action="store_const", const=True, default=None,
                       help="render figures next to the delimited outputs")
        if with_k:
            p.add_argument("--k", type=int)

    p = sub.add_parser("graph", help="write adjacency matrices, degrees and the spectrum")
    common(p, with_k=False)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("embed", help="top-k spectral embedding")
    common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="gradient-descent factorization or feature training")
    common(p)
    p.add_argument("--objective", choices=["lowrank", "sorl"])
    p.add_argument("--step", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="seeded k-means with Hungarian-matched accuracy")
    common(p)
    p.add_argument("--partition", help="JSON file with per-vertex class ids")
    p.add_argument("--kmeans-seed", type=int, dest="kmeans_seed")
    p.add_argument("--kmeans-max-iters", type=int, dest="kmeans_max_iters")
    p.add_argument("--restarts", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("perturb", help="delta sweep with derivative and class-wise terms")
    common(p)
    p.add_argument("--partition", help="JSON file with per-vertex class ids")
    p.add_argument("--deltas", help="comma-separated grid, e.g. 0,0.5,1,2,4")
    p.add_argument("--analytic", choices=["auto", "require", "off"])
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("toy-verify", help="closed-form spectrum bound suite")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--triples", type=int)
    p.add_argument("--bound-constant", type=float, dest="bound_constant")
    p.add_argument("--plot", action="store_const", const=True, default=None)
    p.set_defaults(func=cmd_toy_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(getattr(args, "config", None))
        args.func(args, config)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2
    except SorlLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
