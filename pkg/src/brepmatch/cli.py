"""Command-line entry point: ``brepmatch <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adjprop import propagate
from .brep import read_brep
from .checkpoint import load_params, save_params
from .errors import BRepMatchError, InputError, ModelMismatch, NumericError
from .exact import coincidence_match
from .gradcheck import grad_check
from .greedy import DEFAULT_THRESHOLD, match
from .harness import sweep, sweep_csv, write_sweep
from .matching import read_match, write_match
from .metrics import evaluate
from .overlap import overlap_match
from .synth.dataset import MIXES, generate_dataset, load_dataset, write_dataset
from .training import TrainConfig, TrainItem, partial_prior, train

GRADCHECK_TOL = 1e-4


def _thresholds(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad threshold list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty threshold list")
    return vals


def cmd_generate(a) -> int:
    ds = generate_dataset(a.models, a.variants, a.mix, a.seed)
    write_dataset(ds, a.out)
    print(f"wrote {len(ds.samples)} pairs from {a.models} models to {a.out}")
    return 0


def _items(ds, split: str) -> list[TrainItem]:
    return [TrainItem.of(s.orig, s.upd, s.truth) for s in ds.subset(split)]


def cmd_train(a) -> int:
    ds = load_dataset(a.data)
    cfg = TrainConfig(w=a.w, epochs=a.epochs, seed=a.seed, learning_rate=a.lr, batch_size=a.batch_size)
    history: list[dict] = []
    params = train(_items(ds, "train"), _items(ds, "val"), cfg, history=history)
    save_params(params, a.out)
    if a.history:
        Path(a.history).write_text(json.dumps(history, indent=1), encoding="utf-8")
    print(f"saved {a.out} (best validation loss {params.meta['best_val_loss']:.6f})")
    return 0


def cmd_match(a) -> int:
    bo, bu = read_brep(a.orig), read_brep(a.upd)
    trace: list[dict] = []
    if a.baseline == "exact":
        m = coincidence_match(bo, bu)
    elif a.baseline == "overlap":
        m = overlap_match(bo, bu, coincidence_match(bo, bu))
    elif a.baseline == "adjprop":
        m = propagate(bo, bu, overlap_match(bo, bu, coincidence_match(bo, bu)))
    else:
        if not a.model:
            raise InputError("--model is required unless --baseline is given")
        m, trace = match(bo, bu, load_params(a.model), a.threshold)
    write_match(a.out, m, bo.model_id, bu.model_id, None if a.baseline else a.threshold, trace)
    print(f"{len(m)} pairs written to {a.out}")
    return 0


def cmd_eval(a) -> int:
    pred, pmeta = read_match(a.pred)
    truth, tmeta = read_match(a.truth)
    bu = read_brep(a.upd)
    for label, meta in (("prediction", pmeta), ("truth", tmeta)):
        if meta["upd_model"] != bu.model_id:
            raise ModelMismatch(f"{label} refers to {meta['upd_model']!r}, updated model is {bu.model_id!r}")
    if pmeta["orig_model"] != tmeta["orig_model"]:
        raise ModelMismatch(f"prediction and truth disagree on the original ({pmeta['orig_model']!r} vs {tmeta['orig_model']!r})")
    report = evaluate(pred, truth, bu)
    doc = json.dumps(report.to_dict(), indent=1)
    if a.out:
        Path(a.out).write_text(doc, encoding="utf-8")
    else:
        print(doc)
    return 0


def cmd_sweep(a) -> int:
    ds = load_dataset(a.data)
    params = load_params(a.model) if a.model else None
    thresholds = sorted(a.thresholds)
    table = sweep(ds.subset(a.split), params, thresholds)
    if a.out:
        out = Path(a.out)
        write_sweep(table, out, out.with_suffix(".json"))
        print(f"wrote {out} and {out.with_suffix('.json')}")
    else:
        sys.stdout.write(sweep_csv(table))
    return 0


def cmd_gradcheck(a) -> int:
    ds = load_dataset(a.data)
    params = load_params(a.model)
    pool = sorted(ds.samples, key=lambda s: (sum(s.orig.counts[:3]) + sum(s.upd.counts[:3]), s.pair_id))
    pool = pool[:max(a.samples, len(pool) // 4)]
    rng = np.random.default_rng(a.seed)
    chosen = [pool[k] for k in sorted(rng.choice(len(pool), size=min(a.samples, len(pool)), replace=False))]
    worst = 0.0
    for k, s in enumerate(chosen):
        item = TrainItem.of(s.orig, s.upd, s.truth)
        prior = partial_prior(s.truth, np.random.default_rng([a.seed, k]), 0.5)
        err = grad_check(params, item, prior, a.epsilon, a.coords, seed=a.seed + k)
        print(f"{s.pair_id}: max relative error {err:.3e}")
        worst = max(worst, err)
    print(f"overall max relative error {worst:.3e} (tolerance {a.tol:g})")
    if worst >= a.tol:
        raise NumericError(f"gradient check failed: {worst:.3e} >= {a.tol:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brepmatch", description="Persistent entity matching between B-rep versions.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--models", type=int, required=True)
    g.add_argument("--variants", type=int, default=3)
    g.add_argument("--mix", choices=MIXES, default="complete")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the pair scorer")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--w", type=float, default=2.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--history", help="optional JSON file for per-epoch losses")
    t.set_defaults(func=cmd_train)

    m = sub.add_parser("match", help="match two B-rep JSON files")
    m.add_argument("--orig", required=True)
    m.add_argument("--upd", required=True)
    m.add_argument("--model")
    m.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    m.add_argument("--out", required=True)
    m.add_argument("--baseline", choices=("exact", "overlap", "adjprop"))
    m.set_defaults(func=cmd_match)

    e = sub.add_parser("eval", help="score a predicted matching against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--upd", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="evaluate a split over several thresholds")
    s.add_argument("--data", required=True)
    s.add_argument("--model")
    s.add_argument("--thresholds", type=_thresholds, default=[round(0.1 * k, 1) for k in range(1, 11)])
    s.add_argument("--split", choices=("train", "val", "test"), default="test")
    s.add_argument("--out", help="CSV path; a JSON twin is written next to it")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--samples", type=int, default=5)
    c.add_argument("--coords", type=int, default=200)
    c.add_argument("--epsilon", type=float, default=1e-5)
    c.add_argument("--tol", type=float, default=GRADCHECK_TOL)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BRepMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
