"""Command-line entry points.

Verbs:
  simulate   synthesize an RF frame from a phantom description
  beamform   turn a stored frame into a B-mode PNG with a chosen method
  metrics    contrast / resolution numbers for a stored frame
  serve      run the selection HTTP service
  replay     re-run a recorded session log and verify the final checkpoint
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .api import ApiServer
from .beamformers import Method, das, fdmas, gcf, mvdr
from .config import load_session_config
from .exceptions import AlbeamError
from .geometry import delay_compensate
from .metrics import MetricsReport, RegionSpec, contrast_metrics, fwhm
from .neural import load_checkpoint, model_weights, weighted_channel_sum
from .postprocess import envelope, log_compress, render_png
from .rfbin import read_rfbin, write_rfbin
from .session import ActiveSession, FrameSource, replay_log
from .sim import RFFrame, load_phantom_file, synthesize_frame

DEFAULT_PORT = 8008


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


def _load_frame(path) -> RFFrame:
    obj = read_rfbin(path)
    if not isinstance(obj, RFFrame):
        raise AlbeamError(f"{path} does not hold an RF frame")
    return obj


def cmd_simulate(args) -> int:
    phantom, sim_opts = load_phantom_file(args.phantom)
    cfg = load_session_config(args.config)
    max_depth = float(sim_opts.get("max_depth", 0.04))
    frame = synthesize_frame(phantom, cfg.probe, max_depth=max_depth)
    write_rfbin(args.out, frame)
    print(f"wrote {args.out}: {frame.num_samples} samples x "
          f"{frame.probe.num_channels} channels, digest {frame.digest()[:16]}")
    return 0


def _beamform_env(args, tensor, cfg) -> np.ndarray:
    """Linear envelope of the frame under the requested method."""
    method = Method(args.method)
    if method is Method.DAS:
        data = das(tensor)
    elif method is Method.FDMAS:
        data = fdmas(tensor)
    elif method is Method.MVDR:
        data = mvdr(tensor, cfg.mvdr)
    elif method is Method.GCF:
        data = gcf(tensor, cfg.gcf)
    else:
        if not args.checkpoint:
            raise AlbeamError("--method model needs --checkpoint")
        model, _ = load_checkpoint(args.checkpoint)
        w = model_weights(tensor, model, train=False)
        data = weighted_channel_sum(tensor, w)
    return envelope(data)


def cmd_beamform(args) -> int:
    cfg = load_session_config(args.config)
    frame = _load_frame(args.infile)
    tensor = delay_compensate(frame, cfg.grid)
    env = _beamform_env(args, tensor, cfg)
    img = log_compress(env, args.dynamic_range, method_tag=Method(args.method))
    Path(args.out).write_bytes(render_png(img))
    print(f"wrote {args.out} ({img.db_values.shape[0]}x"
          f"{img.db_values.shape[1]}, {args.method}, "
          f"{args.dynamic_range:g} dB range)")
    return 0


def cmd_metrics(args) -> int:
    cfg = load_session_config(args.config)
    frame = _load_frame(args.infile)
    tensor = delay_compensate(frame, cfg.grid)
    env = _beamform_env(args, tensor, cfg)

    report = MetricsReport(method_tag=args.method)
    lines = [f"method = {args.method}"]
    if args.target and args.background:
        tr, tc, trad = args.target
        br, bc, brad = args.background
        regions = RegionSpec(target_center=(int(tr), int(tc)),
                             target_radius=float(trad),
                             background_center=(int(br), int(bc)),
                             background_radius=float(brad))
        contrast = contrast_metrics(env, regions)
        report.cr = contrast.cr
        report.cnr_db = contrast.cnr_db
        lines.append(f"cr = {contrast.cr!r}")
        lines.append(f"cnr_db = {contrast.cnr_db!r}")
    if args.peak:
        hint = (int(args.peak[0]), int(args.peak[1]))
        report.lateral_fwhm_mm = fwhm(env, hint, "lateral", cfg.grid)
        report.axial_fwhm_mm = fwhm(env, hint, "axial", cfg.grid)
        lines.append(f"lateral_fwhm_mm = {report.lateral_fwhm_mm!r}")
        lines.append(f"axial_fwhm_mm = {report.axial_fwhm_mm!r}")
    if len(lines) == 1:
        return _fail("nothing to measure: give --target/--background "
                     "and/or --peak")
    text = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_serve(args) -> int:
    cfg = load_session_config(args.config)
    if args.phantom:
        phantom, sim_opts = load_phantom_file(args.phantom)
        max_depth = float(sim_opts.get("max_depth", 0.04))
    else:
        from .sim import PhantomSpec
        phantom = PhantomSpec(point_targets=((0.0, 0.02, 1.0),),
                              cyst_regions=(((1.0e-3, 0.0215), 1.2e-3, 0.0),),
                              speckle_density=4.0, rng_seed=0)
        max_depth = 0.03
    source = FrameSource(phantom=phantom, max_depth=max_depth,
                         seed0=cfg.session_seed)

    run_dir = Path(args.run_dir) if args.run_dir else Path(
        tempfile.mkdtemp(prefix="albeam-session-"))
    run_dir.mkdir(parents=True, exist_ok=True)
    session = ActiveSession(cfg, run_dir / "session.ndjson",
                            run_dir / "checkpoints", frame_source=source)

    port = args.port
    if port is None:
        port = int(os.environ.get("ALBEAM_PORT", DEFAULT_PORT))
    static_dir = args.static_dir
    if static_dir is None:
        bundled = Path.cwd() / "frontend" / "dist"
        static_dir = bundled if bundled.is_dir() else None

    server = ApiServer(session, port=port, static_dir=static_dir)
    print(f"session files in {run_dir}")
    print(f"serving on http://127.0.0.1:{server.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("shutting down")
    return 0


def cmd_replay(args) -> int:
    with tempfile.TemporaryDirectory(prefix="albeam-replay-") as tmp:
        work = args.work_dir or tmp
        report = replay_log(args.log, work)
    print(f"rounds = {report['rounds']}")
    print(f"recorded_checksum = {report['recorded_checksum']}")
    print(f"replayed_checksum = {report['final_checksum']}")
    if not report["match"]:
        return _fail("replayed checkpoint does not match the recorded one")
    print("match = true")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="albeam",
        description="plane-wave beamforming with human-steered training")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)

    sp = sub.add_parser("simulate", help="synthesize an RF frame")
    sp.add_argument("--phantom", required=True, help="phantom YAML file")
    sp.add_argument("--out", required=True, help="output .rfbin path")
    sp.add_argument("--config", help="session config YAML")
    sp.set_defaults(fn=cmd_simulate)

    bp = sub.add_parser("beamform", help="render a stored frame to PNG")
    bp.add_argument("--method", required=True,
                    choices=[m.value for m in Method])
    bp.add_argument("--in", dest="infile", required=True, help=".rfbin frame")
    bp.add_argument("--out", required=True, help="output PNG path")
    bp.add_argument("--config", help="session config YAML")
    bp.add_argument("--checkpoint", help="model checkpoint (method=model)")
    bp.add_argument("--dynamic-range", type=float, default=60.0)
    bp.set_defaults(fn=cmd_beamform)

    mp = sub.add_parser("metrics", help="contrast and resolution numbers")
    mp.add_argument("--method", default="das",
                    choices=[m.value for m in Method])
    mp.add_argument("--in", dest="infile", required=True, help=".rfbin frame")
    mp.add_argument("--config", help="session config YAML")
    mp.add_argument("--checkpoint", help="model checkpoint (method=model)")
    mp.add_argument("--dynamic-range", type=float, default=60.0)
    mp.add_argument("--target", nargs=3, type=float,
                    metavar=("ROW", "COL", "RADIUS"),
                    help="target region in pixels")
    mp.add_argument("--background", nargs=3, type=float,
                    metavar=("ROW", "COL", "RADIUS"),
                    help="background region in pixels")
    mp.add_argument("--peak", nargs=2, type=float, metavar=("ROW", "COL"),
                    help="peak hint for FWHM, in pixels")
    mp.add_argument("--out", help="also write the report to this file")
    mp.set_defaults(fn=cmd_metrics)

    vp = sub.add_parser("serve", help="run the selection HTTP service")
    vp.add_argument("--port", type=int, default=None,
                    help=f"listen port (default {DEFAULT_PORT}; "
                         "ALBEAM_PORT overrides the default)")
    vp.add_argument("--config", help="session config YAML")
    vp.add_argument("--phantom", help="phantom YAML for simulated rounds")
    vp.add_argument("--run-dir", help="where logs/checkpoints go")
    vp.add_argument("--static-dir", help="UI bundle to serve at /")
    vp.set_defaults(fn=cmd_serve)

    rp = sub.add_parser("replay", help="re-run a session log and verify")
    rp.add_argument("--log", required=True, help="session .ndjson log")
    rp.add_argument("--work-dir", help="keep replay outputs here")
    rp.set_defaults(fn=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except AlbeamError as exc:
        return _fail(str(exc))
    except FileNotFoundError as exc:
        return _fail(f"{exc.filename}: no such file")


if __name__ == "__main__":
    sys.exit(main())
