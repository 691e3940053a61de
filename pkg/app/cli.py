"""
Командная строка: index, pp, enumerate, simulate, calibrate, draws, approx.

Коды выхода: 0 - успех; 2 - ошибка использования, конфигурации или входных
данных; 3 - ни одна пара порогов не прошла ограничение на ошибку I рода;
4 - анализ вызван не на том объёме выборки; 1 - численный сбой.
"""

import argparse
import asyncio
import json
import logging
import math
from typing import Any, Optional, Sequence

import numpy as np

from app.config import RunConfig, load_run_config
from app.core.dirichlet import CountTable, dcm_log_pmf_array, outcome_array
from app.core.index_core import ProbTable, asymptotic_cov, phi_vector
from app.core.inference import PosteriorSpec, credible_widths, posterior_draws
from app.core.monitor import (
    Method,
    PosteriorCache,
    final_analysis,
    interim_decision,
    predictive_probability,
)
from app.errors import (
    ConfigError,
    NoFeasibleCell,
    PhiMonitorError,
    PredictiveWeightsError,
    TrialComplete,
    WrongSampleSize,
)
from app.reports import emit, provenance, render
from app.sim.approximation import approximation_study
from app.sim.calibration import calibrate
from app.sim.trials import run_scenarios
from app.utils.logging import setup_logging

logger = logging.getLogger("phi_monitor.cli")

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_SAMPLE_SIZE = 4


# ---------------------------------------------------------------------------
# общие части
# ---------------------------------------------------------------------------


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config)
    return cfg.with_overrides(
        seed=args.seed,
        workers=args.workers,
        method=args.method,
        n_sims=args.sims,
        format=args.format,
        path=args.out,
        current=getattr(args, "x", None),
    )


def _meta(command: str, cfg: Optional[RunConfig]) -> dict[str, Any]:
    if cfg is None:
        return provenance(command, None, None)
    return provenance(command, cfg.config_hash(), cfg.seed)


async def _record_async(command: str, meta: dict[str, Any], payload: dict[str, Any]) -> None:
    from app.db import engine, init_db
    from app.storage import record_run

    try:
        await init_db()
        await record_run(command, meta.get("config_hash"), meta.get("seed"), payload)
    finally:
        await engine.dispose()


def _record(args: argparse.Namespace, command: str, meta: dict[str, Any], payload: dict[str, Any]) -> None:
    if not getattr(args, "record", False):
        return
    try:
        asyncio.run(_record_async(command, meta, payload))
    except Exception as e:  # noqa: BLE001
        # отчёт уже выдан, запись в журнал не должна ронять запуск
        logger.warning("Failed to record run %s: %s", command, e)


def _require_section(section: Any, name: str) -> Any:
    if section is None:
        raise ConfigError(f"config has no '{name}' section")
    return section


# ---------------------------------------------------------------------------
# подкоманды
# ---------------------------------------------------------------------------


def cmd_index(args: argparse.Namespace) -> int:
    p = ProbTable.of(args.cells, normalize=args.normalize)
    v = phi_vector(p)
    print(f"phi_eff={v.phi_eff:.6f}")
    print(f"phi_tox={v.phi_tox:.6f}")
    if not p.strictly_positive:
        print("cov=undefined (table has a zero cell)")
        return EXIT_OK

    cov = asymptotic_cov(p)
    print(f"s11={cov.s11:.6f}")
    print(f"s12={cov.s12:.6f}")
    print(f"s22={cov.s22:.6f}")
    if args.total is not None:
        w_eff, w_tox = credible_widths(p, args.total, args.level)
        print(f"width_eff={w_eff:.6f}")
        print(f"width_tox={w_tox:.6f}")
    return EXIT_OK


def cmd_pp(args: argparse.Namespace) -> int:
    cfg = _load(args)
    x = _require_section(cfg.current, "current")
    design = cfg.design

    cache = PosteriorCache(design)
    result = predictive_probability(design, x, cache)
    print(f"pp={result.pp:.6f}")
    if x.total() < design.n_max:
        decision = interim_decision(design, result.pp)
        print(f"decision={decision.kind.value}")
    else:
        decision = None
        final = final_analysis(design, x, cache)
        print(f"claim={final.claim.value}")
        print(f"b={final.b:.6f}")

    meta = _meta("pp", cfg)
    if args.detail:
        text = render(
            [row.as_dict() for row in result.rows],
            cfg.output.format,
            meta,
            extra={"pp": result.pp, "x": list(x.cells)},
        )
        emit(text, args.detail)

    _record(
        args,
        "pp",
        meta,
        {
            "x": list(x.cells),
            "pp": result.pp,
            "decision": None if decision is None else decision.kind.value,
            "method": design.method.value,
        },
    )
    return EXIT_OK


def cmd_enumerate(args: argparse.Namespace) -> int:
    outcomes = outcome_array(args.m)
    cfg: Optional[RunConfig] = None
    f_m: Optional[np.ndarray] = None

    if args.config:
        cfg = _load(args)
        x = _require_section(cfg.current, "current")
        alpha_post = cfg.design.alpha_E.as_array() + x.as_array()
        f_m = np.exp(dcm_log_pmf_array(outcomes, alpha_post))

    rows: list[dict[str, Any]] = []
    for i, y in enumerate(outcomes):
        row: dict[str, Any] = {"y11": int(y[0]), "y12": int(y[1]), "y21": int(y[2]), "y22": int(y[3])}
        if f_m is not None:
            row["f_m"] = float(f_m[i])
        rows.append(row)

    fmt = cfg.output.format if cfg else args.format or "csv"
    emit(render(rows, fmt, _meta("enumerate", cfg), extra={"m": args.m}), args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    section = _require_section(cfg.simulate, "simulate")

    results = run_scenarios(
        cfg.design,
        section.scenarios,
        section.cohorts,
        section.n_trials,
        seed=cfg.seed,
        workers=cfg.workers,
    )
    rows = [r.as_dict() for r in results]
    meta = _meta("simulate", cfg)
    emit(render(rows, cfg.output.format, meta), cfg.output.path)
    _record(args, "simulate", meta, {"rows": rows})
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    section = _require_section(cfg.calibrate, "calibrate")

    grid = calibrate(
        cfg.design,
        section.h0,
        section.h1,
        section.lambdas,
        section.theta_Ls,
        section.n_trials,
        section.type1_cap,
        section.power_floor,
        seed=cfg.seed,
        workers=cfg.workers,
        power_tol=section.power_tol,
    )
    lam, theta_L = grid.selected
    extra = {
        "selected_lambda": lam,
        "selected_theta_L": theta_L,
        "selected_power": grid.selected_power,
        "power_tol": grid.power_tol,
        "power_floor_met": grid.power_floor_met,
    }
    rows = [c.as_dict() for c in grid.cells]
    meta = _meta("calibrate", cfg)
    emit(render(rows, cfg.output.format, meta, extra=extra), cfg.output.path)
    logger.info("Selected lambda=%s theta_L=%s power=%.4f", lam, theta_L, grid.selected_power)
    _record(args, "calibrate", meta, {**extra, "rows": rows})
    return EXIT_OK


def cmd_draws(args: argparse.Namespace) -> int:
    cfg = _load(args)
    x = _require_section(cfg.current, "current")
    y = CountTable.of(args.y) if args.y else CountTable.zeros()
    spec = PosteriorSpec(
        alpha_E=cfg.design.alpha_E,
        alpha_S=cfg.design.alpha_S,
        x=x,
        y=y,
        n_max=cfg.design.n_max,
        delta0=cfg.design.delta0,
    )
    draws = posterior_draws(spec, cfg.design.n_sims, cfg.seed)

    rows = [
        {
            "phi_E_eff": e[0],
            "phi_E_tox": e[1],
            "phi_S_eff": s[0],
            "phi_S_tox": s[1],
            "diff_eff": d[0],
            "diff_tox": d[1],
        }
        for e, s, d in zip(draws.phi_E.tolist(), draws.phi_S.tolist(), draws.difference.tolist())
    ]
    meta = _meta("draws", cfg)
    emit(render(rows, cfg.output.format, meta), cfg.output.path)

    params = {
        "provenance": meta,
        "normal_E": draws.normal_E.model_dump(),
        "normal_S": draws.normal_S.model_dump(),
        "normal_difference": draws.normal_difference.model_dump(),
    }
    if args.params:
        emit(json.dumps(params, indent=2, sort_keys=True) + "\n", args.params)
    else:
        logger.info("Normal approximation: %s", params)
    return EXIT_OK


def cmd_approx(args: argparse.Namespace) -> int:
    cfg = _load(args)
    section = _require_section(cfg.approximation, "approximation")

    rows = [
        row.as_dict()
        for row in approximation_study(
            cfg.design,
            section.hypotheses,
            section.p_S,
            section.alpha_S_totals,
            section.current_sizes,
            section.future_size,
            section.n_sims,
            seed=cfg.seed,
        )
    ]
    meta = _meta("approx", cfg)
    emit(render(rows, cfg.output.format, meta), cfg.output.path)
    worst = max((abs(r["difference"]) for r in rows), default=math.nan)
    logger.info("Largest |asymptotic - montecarlo| difference: %.4f", worst)
    _record(args, "approx", meta, {"rows": rows})
    return EXIT_OK


# ---------------------------------------------------------------------------
# парсер
# ---------------------------------------------------------------------------


def _nonneg_int(value: str) -> int:
    n = int(value)
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_nonneg_int, default=None, help="seed for all random streams")
    common.add_argument("--workers", type=int, default=None, help="worker threads")
    common.add_argument("--method", choices=[m.value for m in Method], default=None)
    common.add_argument("--sims", type=int, default=None, help="Monte Carlo draws per B(Y)")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--out", default=None, help="report path (stdout if omitted)")
    common.add_argument("--record", action="store_true", help="store the run in the run ledger")
    common.add_argument("-v", "--verbose", action="store_true", help="DEBUG logging")

    parser = argparse.ArgumentParser(
        prog="phi-monitor",
        description="Predictive-probability monitoring for single-arm efficacy/toxicity trials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[common], help="index vector and asymptotic covariance")
    p.add_argument("cells", type=float, nargs=4, metavar=("P11", "P12", "P21", "P22"))
    p.add_argument("--normalize", action="store_true", help="divide cells by their sum")
    p.add_argument("--total", type=float, default=None, help="effective size for credible widths")
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("pp", parents=[common], help="predictive probability for current data")
    p.add_argument("--config", required=True)
    p.add_argument("--x", type=_nonneg_int, nargs=4, metavar=("X11", "X12", "X21", "X22"))
    p.add_argument("--detail", default=None, help="path for per-outcome detail rows")
    p.set_defaults(func=cmd_pp)

    p = sub.add_parser("enumerate", parents=[common], help="all 2x2 tables with total M")
    p.add_argument("m", type=_nonneg_int, metavar="M")
    p.add_argument("--config", default=None)
    p.add_argument("--x", type=_nonneg_int, nargs=4, metavar=("X11", "X12", "X21", "X22"))
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("simulate", parents=[common], help="operating characteristics of scenarios")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", parents=[common], help="(lambda, theta_L) grid search")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("draws", parents=[common], help="posterior samples of the index vectors")
    p.add_argument("--config", required=True)
    p.add_argument("--x", type=_nonneg_int, nargs=4, metavar=("X11", "X12", "X21", "X22"))
    p.add_argument("--y", type=_nonneg_int, nargs=4, metavar=("Y11", "Y12", "Y21", "Y22"))
    p.add_argument("--params", default=None, help="path for normal-approximation parameters (JSON)")
    p.set_defaults(func=cmd_draws)

    p = sub.add_parser("approx", parents=[common], help="asymptotic vs Monte Carlo PP study")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_approx)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID

    setup_logging(logging.DEBUG if args.verbose else None)

    try:
        return args.func(args)
    except NoFeasibleCell as e:
        logger.error("%s", e)
        return EXIT_INFEASIBLE
    except (TrialComplete, WrongSampleSize) as e:
        logger.error("%s", e)
        return EXIT_SAMPLE_SIZE
    except PredictiveWeightsError as e:
        logger.error("%s", e)
        return EXIT_NUMERIC
    except PhiMonitorError as e:
        logger.error("%s: %s", e.reason, e)
        return EXIT_INVALID
    except ValueError as e:
        logger.error("invalid input: %s", e)
        return EXIT_INVALID
