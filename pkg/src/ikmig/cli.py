"""Command-line pipeline: synthesize, recover, migrate, diagnose.

Exit codes: 0 success, 2 validation or format error, 3 numeric or
singularity error, 4 I/O error.  Output files are written atomically
(temp file + rename) and every command leaves a manifest.json in its
output directory recording inputs, outputs, and hashes.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import __version__
from .errors import (
    DataFormatError,
    NumericError,
    SceneParseError,
    SceneValidationError,
    SingularityError,
)
from .forward import (
    array_response_band,
    direct_arrivals_band,
    intensity_data,
    linearization_residual,
    read_field_csv,
    read_intensity_csv,
    write_field_csv,
    write_illumination_csv,
    write_intensity_csv,
)
from .migrate import (
    image_metrics,
    migrate_broadband_stack,
    spurious_term_image,
    write_image_csv,
    write_image_pgm,
)
from .recover import check_geometric_condition, condition_number, recover_band
from .scene import PRESET_CASES, emit_scene, parse_scene, preset_scene, scene_digest
from .stochastic import (
    PowerSpectrum,
    clean_power_data,
    noisy_power_data,
    sample_illumination,
)

EXPERIMENT_CASES = PRESET_CASES + ("stochastic_noisy", "condition_study", "spurious_term")

_NOISE_FRACTION_DEFAULT = 0.1


class _UsageError(Exception):
    """Bad flag combination; maps to exit code 2."""


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------


def _load_scene(spec: str):
    if spec.startswith("preset:"):
        return preset_scene(spec[len("preset:"):])
    with open(spec) as fh:
        return parse_scene(fh.read())


def _atomic(path: str, writer) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(path) + ".", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _write_json(obj, path: str) -> None:
    text = json.dumps(_jsonable(obj), indent=1, sort_keys=True)
    _atomic(path, lambda p: open(p, "w").write(text + "\n"))


def _write_manifest(out_dir: str, command: str, scene, params: dict,
                    inputs: dict, outputs: list) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "scene_sha256": scene_digest(scene) if scene is not None else None,
        "parameters": params,
        "inputs": {name: {"path": path, "sha256": _sha256(path)}
                   for name, path in inputs.items()},
        "outputs": {os.path.basename(path): _sha256(path) for path in outputs},
    }
    _write_json(manifest, os.path.join(out_dir, "manifest.json"))


def _metrics_dict(m) -> dict:
    return {
        "peak_cell": list(m.peak_cell),
        "peak_position_m": list(m.peak_position),
        "peak_value": m.peak_value,
        "range_axis": m.range_axis,
        "range_fwhm_m": m.range_fwhm_m,
        "crossrange_fwhm_m": m.crossrange_fwhm_m,
        "rayleigh_estimate_m": m.rayleigh_estimate_m,
        "range_estimate_m": m.range_estimate_m,
        "correlation": m.correlation,
        "flags": list(m.flags),
    }


def _geometry_dict(report) -> dict:
    return {
        "ok": report.ok,
        "violating_receivers": list(report.violating_receivers),
        "theta_tol": report.theta_tol,
    }


def _peak_displacement(a, b) -> int:
    return max(abs(a.peak_cell[0] - b.peak_cell[0]), abs(a.peak_cell[1] - b.peak_cell[1]))


def _synthesize(scene, stochastic: bool, seed, noise_fraction):
    if noise_fraction is not None and not stochastic:
        raise _UsageError("--noise-fraction requires --stochastic")
    if not stochastic:
        return intensity_data(scene)
    if seed is None:
        raise _UsageError("stochastic synthesis requires --seed")
    spectrum = PowerSpectrum.for_band(scene.band)
    draw = sample_illumination(spectrum, scene.band, seed)
    if noise_fraction:
        return noisy_power_data(scene, draw, noise_fraction, seed)
    return clean_power_data(scene, draw)


def _write_data(data, out_dir: str) -> list:
    ipath = os.path.join(out_dir, "intensity.csv")
    lpath = os.path.join(out_dir, "illumination.csv")
    _atomic(ipath, lambda p: write_intensity_csv(data, p))
    _atomic(lpath, lambda p: write_illumination_csv(data, p))
    return [ipath, lpath]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    scene = _load_scene(args.scene)
    data = _synthesize(scene, args.stochastic, args.seed, args.noise_fraction)
    os.makedirs(args.out, exist_ok=True)
    outputs = _write_data(data, args.out)
    _write_manifest(args.out, "simulate", scene,
                    {"scene": args.scene, "stochastic": args.stochastic,
                     "seed": args.seed, "noise_fraction": args.noise_fraction},
                    {} if args.scene.startswith("preset:") else {"scene": args.scene},
                    outputs)
    return 0


def cmd_recover(args) -> int:
    scene = _load_scene(args.scene)
    illum = args.illumination
    if illum is None:
        sibling = os.path.join(os.path.dirname(os.path.abspath(args.data)), "illumination.csv")
        illum = sibling if os.path.exists(sibling) else None
    data = read_intensity_csv(args.data, illum)
    ptilde = recover_band(scene, data)
    geometry = check_geometric_condition(scene)
    if not geometry.ok:
        print(f"warning: geometric visibility violated at receivers "
              f"{list(geometry.violating_receivers)[:8]}", file=sys.stderr)
    conds = [condition_number(scene, w) for w in scene.band.omegas]
    os.makedirs(args.out, exist_ok=True)
    fpath = os.path.join(args.out, "recovered.csv")
    _atomic(fpath, lambda p: write_field_csv(scene.band.omegas, ptilde, p))
    rpath = os.path.join(args.out, "report.json")
    _write_json({"conditioning": conds, "geometry": _geometry_dict(geometry)}, rpath)
    inputs = {"data": args.data}
    if illum is not None:
        inputs["illumination"] = illum
    if not args.scene.startswith("preset:"):
        inputs["scene"] = args.scene
    _write_manifest(args.out, "recover", scene, {"scene": args.scene},
                    inputs, [fpath, rpath])
    return 0


def _check_field_grid(scene, omegas) -> None:
    band = scene.band.omegas
    if omegas.shape != band.shape or np.any(omegas != band):
        raise DataFormatError("field frequencies do not match the scene band")


def cmd_migrate(args) -> int:
    scene = _load_scene(args.scene)
    omegas, values = read_field_csv(args.field)
    _check_field_grid(scene, omegas)
    if values.shape[1] != scene.n_receivers:
        raise DataFormatError("field receiver count does not match the scene")
    stacks = [values]
    if args.reference:
        r_omegas, r_values = read_field_csv(args.reference)
        _check_field_grid(scene, r_omegas)
        stacks.append(r_values)
    images = migrate_broadband_stack(scene, np.stack(stacks, axis=2), threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    cpath = os.path.join(args.out, "image.csv")
    gpath = os.path.join(args.out, "image.pgm")
    _atomic(cpath, lambda p: write_image_csv(images[0], p))
    _atomic(gpath, lambda p: write_image_pgm(images[0], p))
    outputs += [cpath, gpath]
    if args.reference:
        metrics = image_metrics(images[0], scene, reference=images[1])
        ref_metrics = image_metrics(images[1], scene)
        payload = {"image": _metrics_dict(metrics),
                   "reference": _metrics_dict(ref_metrics),
                   "peak_displacement_cells": _peak_displacement(metrics, ref_metrics)}
        rc = os.path.join(args.out, "image_reference.csv")
        rg = os.path.join(args.out, "image_reference.pgm")
        _atomic(rc, lambda p: write_image_csv(images[1], p))
        _atomic(rg, lambda p: write_image_pgm(images[1], p))
        outputs += [rc, rg]
    else:
        payload = {"image": _metrics_dict(image_metrics(images[0], scene))}
    mpath = os.path.join(args.out, "metrics.json")
    _write_json(payload, mpath)
    outputs.append(mpath)
    inputs = {"field": args.field}
    if args.reference:
        inputs["reference"] = args.reference
    if not args.scene.startswith("preset:"):
        inputs["scene"] = args.scene
    _write_manifest(args.out, "migrate", scene,
                    {"scene": args.scene, "threads": args.threads}, inputs, outputs)
    return 0


def _experiment_condition_study(out_dir: str) -> int:
    scene3 = preset_scene("point")
    scene2 = replace(scene3, dimension=2)
    omegas = scene3.band.omegas
    rows = ["freq_index,omega_rad_s,cond_d3,cond_d2"]
    for i, w in enumerate(omegas):
        rows.append(f"{i},{format(w, '.17g')},"
                    f"{format(condition_number(scene3, w), '.17g')},"
                    f"{format(condition_number(scene2, w), '.17g')}")
    cpath = os.path.join(out_dir, "condition.csv")
    _atomic(cpath, lambda p: open(p, "w").write("\n".join(rows) + "\n"))
    dists = np.linalg.norm(scene3.receivers - scene3.source, axis=1)
    ratio = float(dists.max() / dists.min())
    lpath = os.path.join(out_dir, "limits.json")
    _write_json({"d3_distance_ratio": ratio, "d2_sqrt_limit": math.sqrt(ratio)}, lpath)
    _write_manifest(out_dir, "experiment", scene3, {"case": "condition_study"},
                    {}, [cpath, lpath])
    return 0


def _experiment_spurious(out_dir: str, threads: int) -> int:
    scene = preset_scene("point")
    mirror, report = spurious_term_image(scene, threads=threads)
    p = array_response_band(scene)
    (true_img,) = migrate_broadband_stack(scene, p[:, :, None], threads=threads)
    outputs = []
    for name, img in (("image_mirror", mirror), ("image_true", true_img)):
        c = os.path.join(out_dir, f"{name}.csv")
        g = os.path.join(out_dir, f"{name}.pgm")
        _atomic(c, lambda p_, img=img: write_image_csv(img, p_))
        _atomic(g, lambda p_, img=img: write_image_pgm(img, p_))
        outputs += [c, g]
    rpath = os.path.join(out_dir, "report.json")
    _write_json({"ratio": report.ratio, "degenerate": report.degenerate,
                 "geometry_ok": report.geometry_ok}, rpath)
    outputs.append(rpath)
    _write_manifest(out_dir, "experiment", scene, {"case": "spurious_term"}, {}, outputs)
    return 0


def cmd_experiment(args) -> int:
    case = args.case
    if case not in EXPERIMENT_CASES:
        raise _UsageError(f"unknown case {case!r}; choose from {', '.join(EXPERIMENT_CASES)}")
    os.makedirs(args.out, exist_ok=True)
    if case == "condition_study":
        return _experiment_condition_study(args.out)
    if case == "spurious_term":
        return _experiment_spurious(args.out, args.threads)

    stochastic = case in ("stochastic", "stochastic_noisy")
    scene_case = "stochastic" if case == "stochastic_noisy" else case
    scene = preset_scene(scene_case)
    noise = _NOISE_FRACTION_DEFAULT if case == "stochastic_noisy" else None
    data = _synthesize(scene, stochastic, args.seed, noise)

    spath = os.path.join(args.out, "scene.json")
    _atomic(spath, lambda p: open(p, "w").write(emit_scene(scene)))
    outputs = [spath] + _write_data(data, args.out)

    ptilde = recover_band(scene, data)
    geometry = check_geometric_condition(scene)
    if not geometry.ok:
        print(f"warning: geometric visibility violated at receivers "
              f"{list(geometry.violating_receivers)[:8]}", file=sys.stderr)
    fpath = os.path.join(args.out, "recovered.csv")
    _atomic(fpath, lambda p: write_field_csv(scene.band.omegas, ptilde, p))
    outputs.append(fpath)

    p = array_response_band(scene)
    img_true, img_rec = migrate_broadband_stack(
        scene, np.stack([p, ptilde], axis=2), threads=args.threads)
    for name, img in (("image_true", img_true), ("image_recovered", img_rec)):
        c = os.path.join(args.out, f"{name}.csv")
        g = os.path.join(args.out, f"{name}.pgm")
        _atomic(c, lambda p_, img=img: write_image_csv(img, p_))
        _atomic(g, lambda p_, img=img: write_image_pgm(img, p_))
        outputs += [c, g]

    m_true = image_metrics(img_true, scene)
    m_rec = image_metrics(img_rec, scene, reference=img_true)
    residual = max(linearization_residual(scene, w) for w in scene.band.omegas)
    mpath = os.path.join(args.out, "metrics.json")
    _write_json({
        "true": _metrics_dict(m_true),
        "recovered": _metrics_dict(m_rec),
        "peak_displacement_cells": _peak_displacement(m_rec, m_true),
        "linearization_residual_max": residual,
        "geometry": _geometry_dict(geometry),
    }, mpath)
    outputs.append(mpath)
    _write_manifest(args.out, "experiment", scene,
                    {"case": case, "seed": args.seed, "threads": args.threads,
                     "noise_fraction": noise},
                    {}, outputs)
    return 0


def cmd_condition(args) -> int:
    scene = _load_scene(args.scene)
    rows = ["freq_index,omega_rad_s,cond"]
    for i, w in enumerate(scene.band.omegas):
        rows.append(f"{i},{format(w, '.17g')},{format(condition_number(scene, w), '.17g')}")
    os.makedirs(args.out, exist_ok=True)
    cpath = os.path.join(args.out, "condition.csv")
    _atomic(cpath, lambda p: open(p, "w").write("\n".join(rows) + "\n"))
    _write_manifest(args.out, "condition", scene, {"scene": args.scene},
                    {} if args.scene.startswith("preset:") else {"scene": args.scene},
                    [cpath])
    return 0


def cmd_check_geometry(args) -> int:
    scene = _load_scene(args.scene)
    report = check_geometric_condition(scene)
    payload = _geometry_dict(report)
    print(json.dumps(payload, indent=1, sort_keys=True))
    if not report.ok:
        print("warning: source lies inside a receiver view cone", file=sys.stderr)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        gpath = os.path.join(args.out, "geometry.json")
        _write_json(payload, gpath)
        _write_manifest(args.out, "check-geometry", scene, {"scene": args.scene},
                        {} if args.scene.startswith("preset:") else {"scene": args.scene},
                        [gpath])
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ikmig",
        description="Phaseless array imaging: simulate, recover, migrate.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scene_arg(p):
        p.add_argument("--scene", required=True,
                       help="scene JSON path, or preset:<name>")

    p = sub.add_parser("simulate", help="synthesize phaseless data")
    scene_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument("--stochastic", action="store_true")
    p.add_argument("--seed", type=_u64, default=None)
    p.add_argument("--noise-fraction", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", help="recover the projected field from data")
    scene_arg(p)
    p.add_argument("--data", required=True)
    p.add_argument("--illumination", default=None,
                   help="sidecar path; defaults to illumination.csv beside the data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("migrate", help="image a per-frequency field file")
    scene_arg(p)
    p.add_argument("--field", required=True)
    p.add_argument("--reference", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_migrate)

    p = sub.add_parser("experiment", help="run a named end-to-end case")
    p.add_argument("--case", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=_u64, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("condition", help="per-frequency condition numbers")
    scene_arg(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_condition)

    p = sub.add_parser("check-geometry", help="source visibility diagnostic")
    scene_arg(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_geometry)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (_UsageError, SceneParseError, SceneValidationError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SingularityError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
