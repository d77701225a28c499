"""Command-line surface: synthesize | verify | simulate | export | plot.

Also defines the on-disk artifact formats that tie the pipeline together:
the flat key-value config file, the versioned certificate file, and the
run manifest recorded in every output for provenance.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, conic, sim, synth, verify
from .poly import Polynomial
from .semialg import NVARS, EnvironmentConfig, Region, build_sets, membership

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_TOO_LARGE = 3
EXIT_VERIFICATION_FAILED = 4
EXIT_CAPTURED = 5
EXIT_NO_REACH = 6  # Timeout or LeftArena

CERT_HEADER = "sosevade-certificate v1"

_TUPLE_KEYS = {"x_r", "x_ie", "x_ip"}
_INT_KEYS = {"alpha", "d_rho", "d_psi", "d_sigma", "d_lambda"}


# ---------------------------------------------------------------------------
# Config file: flat key = value lines mirroring EnvironmentConfig
# ---------------------------------------------------------------------------

def config_to_text(cfg: EnvironmentConfig) -> str:
    lines = []
    for key, val in cfg.to_dict().items():
        if key in _TUPLE_KEYS:
            lines.append(f"{key} = {val[0]!r}, {val[1]!r}")
        else:
            lines.append(f"{key} = {val!r}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> EnvironmentConfig:
    known = set(EnvironmentConfig().to_dict())
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        try:
            if key in _TUPLE_KEYS:
                parts = [float(tok) for tok in val.replace("(", " ").replace(")", " ").replace(",", " ").split()]
                if len(parts) != 2:
                    raise ValueError("expected two numbers")
                values[key] = tuple(parts)
            elif key in _INT_KEYS:
                values[key] = int(val.strip())
            else:
                values[key] = float(val.strip())
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key!r}: {exc}") from exc
    cfg = EnvironmentConfig.from_dict(values)
    cfg.validate()
    return cfg


def load_config(path: str) -> EnvironmentConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    config_path: str = ""
    output_paths: list = field(default_factory=list)
    seed: int = 0
    version: str = __version__
    timings: dict = field(default_factory=dict)

    def render(self) -> str:
        lines = [
            f"command={self.command}",
            f"config={self.config_path}",
            f"outputs={','.join(self.output_paths)}",
            f"seed={self.seed}",
            f"version={self.version}",
        ]
        for stage, secs in self.timings.items():
            lines.append(f"time_{stage}={secs:.3f}s")
        return "\n".join(lines)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.render().encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Polynomial and certificate serialization
# ---------------------------------------------------------------------------

def poly_to_rows(p: Polynomial) -> list[str]:
    """One 'e1 .. en coefficient' row per monomial, in sorted order."""
    rows = []
    for mono in sorted(p.terms):
        rows.append(" ".join(map(str, mono)) + f" {p.terms[mono]:.17g}")
    return rows


def poly_from_rows(nvars: int, rows: list[str]) -> Polynomial:
    terms = {}
    for row in rows:
        toks = row.split()
        if len(toks) != nvars + 1:
            raise ValueError(f"expected {nvars} exponents and a coefficient: {row!r}")
        mono = tuple(int(t) for t in toks[:nvars])
        terms[mono] = float(toks[nvars])
    return Polynomial(nvars, terms)


def certificate_to_text(cert, manifest: RunManifest | None = None) -> str:
    lines = [CERT_HEADER, "", "[config]"]
    lines.append(config_to_text(cert.cfg).rstrip())
    lines += ["", "[solver]"]
    lines.append(f"status = {cert.solver_status}")
    for ln in cert.solver_summary.splitlines():
        lines.append(f"# {ln}")
    polys = [("rho_hat", cert.rho_hat)]
    polys += [(f"psi_hat_{i + 1}", p) for i, p in enumerate(cert.psi_hat)]
    polys += [(f"y_{k + 1}", p) for k, p in enumerate(cert.y)]
    polys += [(f"multiplier {name}", p) for name, p in sorted(cert.multipliers.items())]
    for name, p in polys:
        lines += ["", f"[polynomial {name}]"]
        lines += poly_to_rows(p)
    if manifest is not None:
        lines += ["", "[manifest]", f"hash = {manifest.hash}"]
        for ln in manifest.render().splitlines():
            lines.append(f"# {ln}")
    return "\n".join(lines) + "\n"


def certificate_from_text(text: str) -> synth.Certificate:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CERT_HEADER:
        raise ValueError("not a certificate file (bad header)")
    sections: dict[str, list[str]] = {}
    current = None
    for ln in lines[1:]:
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1]
            sections[current] = []
        elif current is not None:
            sections[current].append(s)
        else:
            raise ValueError(f"content before first section: {s!r}")
    if "config" not in sections:
        raise ValueError("certificate is missing its [config] section")
    cfg = parse_config("\n".join(sections["config"]))
    status = ""
    for s in sections.get("solver", []):
        key, _, val = s.partition("=")
        if key.strip() == "status":
            status = val.strip()

    def poly(name: str) -> Polynomial:
        key = f"polynomial {name}"
        if key not in sections:
            raise ValueError(f"certificate is missing section [{key}]")
        return poly_from_rows(NVARS, sections[key])

    multipliers = {}
    for key, rows in sections.items():
        if key.startswith("polynomial multiplier "):
            multipliers[key[len("polynomial multiplier "):]] = poly_from_rows(NVARS, rows)
    return synth.Certificate(
        rho_hat=poly("rho_hat"),
        psi_hat=[poly("psi_hat_1"), poly("psi_hat_2")],
        y=[poly(f"y_{k + 1}") for k in range(4)],
        multipliers=multipliers,
        cfg=cfg, V=synth.build_V(cfg), alpha=cfg.alpha,
        solver_status=status,
    )


def load_certificate(path: str) -> synth.Certificate:
    with open(path, "r", encoding="utf-8") as f:
        return certificate_from_text(f.read())


# ---------------------------------------------------------------------------
# SVG rendering (deterministic text output; no plotting dependency)
# ---------------------------------------------------------------------------

_PANEL = 360          # pixel side of one square panel
_MARGIN = 24


def _world_to_panel(cfg: EnvironmentConfig, x: float, y: float, x0px: float) -> tuple[float, float]:
    half = cfg.R + cfg.R_r + 0.3
    s = (_PANEL - 2 * _MARGIN) / (2 * half)
    px = x0px + _MARGIN + (x + half) * s
    py = _MARGIN + (half - y) * s
    return px, py


def _fmt_pt(v: float) -> str:
    return f"{v:.2f}"


def _crescent_path(cfg: EnvironmentConfig, x0px: float) -> str:
    """Target lobe: inside the target ball, outside the arena circle."""
    cx, cy = cfg.x_r
    d = np.hypot(cx, cy)
    a = (d * d + cfg.R**2 - cfg.R_r**2) / (2 * d)
    h = np.sqrt(max(cfg.R**2 - a * a, 0.0))
    ux, uy = cx / d, cy / d
    base_ang_arena = np.arctan2(cy, cx)
    half_arena = np.arctan2(h, a)
    # arc of the target circle outside the arena, sampled densely
    p1 = (a * ux - h * uy, a * uy + h * ux)
    ang1 = np.arctan2(p1[1] - cy, p1[0] - cx)
    p2 = (a * ux + h * uy, a * uy - h * ux)
    ang2 = np.arctan2(p2[1] - cy, p2[0] - cx)
    while ang2 < ang1:
        ang2 += 2 * np.pi
    pts = []
    for t in np.linspace(ang1, ang2, 48):
        x, y = cx + cfg.R_r * np.cos(t), cy + cfg.R_r * np.sin(t)
        if x * x + y * y >= cfg.R**2 - 1e-9:
            pts.append((x, y))
    # back along the arena circle
    for t in np.linspace(base_ang_arena + half_arena, base_ang_arena - half_arena, 24):
        pts.append((cfg.R * np.cos(t), cfg.R * np.sin(t)))
    coords = [_world_to_panel(cfg, x, y, x0px) for x, y in pts]
    d_attr = "M " + " L ".join(f"{_fmt_pt(px)} {_fmt_pt(py)}" for px, py in coords) + " Z"
    return d_attr


def _polyline(points: list[tuple[float, float]], stroke: str, dash: str = "") -> str:
    pts = " ".join(f"{_fmt_pt(px)},{_fmt_pt(py)}" for px, py in points)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{stroke}" stroke-width="1.5"{extra} points="{pts}"/>'


def _game_panel(cfg: EnvironmentConfig, trace: sim.Trace, label: str, x0px: float) -> list[str]:
    out = [f'<g class="game-panel" transform="translate(0,0)">']
    ccx, ccy = _world_to_panel(cfg, 0, 0, x0px)
    r_px = _world_to_panel(cfg, cfg.R, 0, x0px)[0] - ccx
    out.append(f'<circle class="arena" cx="{_fmt_pt(ccx)}" cy="{_fmt_pt(ccy)}" r="{_fmt_pt(r_px)}" '
               'fill="none" stroke="black" stroke-width="1.5"/>')
    out.append(f'<path class="target" d="{_crescent_path(cfg, x0px)}" '
               'fill="#b7e4b0" stroke="green" stroke-width="1"/>')
    ev = [_world_to_panel(cfg, r.x[0], r.x[1], x0px) for r in trace.rows]
    pu = [_world_to_panel(cfg, r.x[2], r.x[3], x0px) for r in trace.rows]
    out.append(_polyline(ev, "blue"))
    out.append(_polyline(pu, "red"))
    fx, fy = trace.rows[-1].x[2], trace.rows[-1].x[3]
    fcx, fcy = _world_to_panel(cfg, fx, fy, x0px)
    ra_px = r_px * cfg.R_a / cfg.R
    out.append(f'<circle class="catch-radius" cx="{_fmt_pt(fcx)}" cy="{_fmt_pt(fcy)}" r="{_fmt_pt(ra_px)}" '
               'fill="rgba(255,0,0,0.15)" stroke="red" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{_fmt_pt(x0px + _PANEL / 2)}" y="16" text-anchor="middle" '
               f'font-size="12">{label} ({trace.outcome.value})</text>')
    out.append("</g>")
    return out


def _dist_panel(cfg: EnvironmentConfig, trace: sim.Trace, x0px: float, y0px: float) -> list[str]:
    ts = [r.t for r in trace.rows]
    ds = [r.dist for r in trace.rows]
    t_max = max(ts[-1], 1e-9)
    d_max = max(max(ds), cfg.R_a) * 1.1
    w, hgt = _PANEL - 2 * _MARGIN, _PANEL - 2 * _MARGIN

    def to_px(t, d):
        return (x0px + _MARGIN + t / t_max * w, y0px + _MARGIN + (1 - d / d_max) * hgt)

    out = ['<g class="dist-panel">']
    ox, oy = to_px(0, 0)
    out.append(f'<line class="axis" x1="{_fmt_pt(ox)}" y1="{_fmt_pt(oy)}" '
               f'x2="{_fmt_pt(to_px(t_max, 0)[0])}" y2="{_fmt_pt(oy)}" stroke="black"/>')
    out.append(f'<line class="axis" x1="{_fmt_pt(ox)}" y1="{_fmt_pt(oy)}" '
               f'x2="{_fmt_pt(ox)}" y2="{_fmt_pt(to_px(0, d_max)[1])}" stroke="black"/>')
    out.append(_polyline([to_px(t, d) for t, d in zip(ts, ds)], "blue"))
    ry = to_px(0, cfg.R_a)[1]
    out.append(f'<line class="catch-line" x1="{_fmt_pt(ox)}" y1="{_fmt_pt(ry)}" '
               f'x2="{_fmt_pt(to_px(t_max, 0)[0])}" y2="{_fmt_pt(ry)}" '
               'stroke="red" stroke-dasharray="5 4"/>')
    out.append(f'<text x="{_fmt_pt(ox)}" y="{_fmt_pt(ry - 4)}" font-size="10" fill="red">R_a</text>')
    out.append(f'<text x="{_fmt_pt(x0px + _PANEL / 2)}" y="{_fmt_pt(y0px + 14)}" text-anchor="middle" '
               'font-size="12">evader-pursuer distance</text>')
    out.append("</g>")
    return out


def render_traces_svg(cfg: EnvironmentConfig, traces: list[tuple[str, sim.Trace]],
                      manifest: RunManifest | None = None) -> str:
    """Side-by-side panels per trace: game view on top, distance plot below."""
    if not traces:
        raise ValueError("need at least one trace to plot")
    for _, tr in traces:
        if not tr.rows:
            raise ValueError("cannot plot an empty trace")
    width = _PANEL * len(traces)
    height = 2 * _PANEL
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">']
    if manifest is not None:
        parts.append(f"<!-- manifest={manifest.hash} -->")
    for k, (label, tr) in enumerate(traces):
        x0px = k * _PANEL
        parts += _game_panel(cfg, tr, label, x0px)
        parts += _dist_panel(cfg, tr, x0px, _PANEL)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _say(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg)


def cmd_synthesize(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    manifest = RunManifest("synthesize", config_path=args.config,
                           output_paths=[args.out], seed=args.seed)
    t0 = time.time()
    try:
        cert, report = synth.synthesize(cfg, seed=args.seed)
    except synth.SynthesisInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except synth.SynthesisTooLarge as exc:
        print(f"too large for the internal solver: {exc}", file=sys.stderr)
        print("hint: use 'sosevade export' to write the program in SDPA format",
              file=sys.stderr)
        return EXIT_TOO_LARGE
    except (synth.VerificationFailed, synth.SolverFailure) as exc:
        print(f"no verified certificate: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION_FAILED
    manifest.timings["synthesize"] = time.time() - t0
    text = certificate_to_text(cert, manifest)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(text)
    _say(args, f"wrote certificate to {args.out}")
    _say(args, report.render())
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        cert = load_certificate(args.certificate)
    except (OSError, ValueError) as exc:
        print(f"certificate error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    report = verify.check_certificate(cert, n_samples=args.samples, seed=args.seed)
    _say(args, report.render())
    return EXIT_OK if report.overall else EXIT_VERIFICATION_FAILED


def cmd_simulate(args) -> int:
    try:
        cert = load_certificate(args.certificate)
    except (OSError, ValueError) as exc:
        print(f"certificate error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        strategy = sim.Strategy(args.strategy)
        x0 = tuple(float(t) for t in args.x0.split(",")) if args.x0 else \
            (*cert.cfg.x_ie, *cert.cfg.x_ip)
        if len(x0) != 4:
            raise ValueError("--x0 needs four comma-separated numbers")
        simcfg = sim.SimConfig(dt=args.dt, t_max=args.tmax, strategy=strategy, x0=x0)
        trace = sim.run(cert, simcfg)
    except ValueError as exc:
        print(f"simulation setup error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    manifest = RunManifest("simulate", config_path=args.certificate,
                           output_paths=[args.out] if args.out else [], seed=args.seed)
    comments = [f"manifest={manifest.hash}", f"strategy={strategy.value}"]
    csv = sim.trace_to_csv(trace, extra_comments=comments)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(csv)
        _say(args, f"wrote trace to {args.out}")
    else:
        sys.stdout.write(csv)
    _say(args, f"outcome: {trace.outcome.value} after {trace.rows[-1].t:g}s "
               f"({len(trace.rows)} rows)")
    if trace.outcome is sim.Outcome.REACHED_TARGET:
        return EXIT_OK
    if trace.outcome is sim.Outcome.CAPTURED:
        return EXIT_CAPTURED
    return EXIT_NO_REACH


def cmd_export(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    manifest = RunManifest("export", config_path=args.config,
                           output_paths=[args.out], seed=args.seed)
    t0 = time.time()
    handles = synth.build_program(cfg)
    cp = conic.compile(handles.program)
    text = conic.export_sdpa(cp)
    manifest.timings["export"] = time.time() - t0
    header = f"* sosevade SDPA export; manifest={manifest.hash}\n"
    try:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(header + text)
    except OSError as exc:
        print(f"write failure: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    _say(args, f"wrote {args.out}: {len(cp.rows)} rows, {len(cp.psd_blocks)} PSD blocks "
               f"(max side {max(cp.psd_blocks, default=0)}), {cp.free_var_count} free variables")
    return EXIT_OK


def cmd_plot(args) -> int:
    traces = []
    cfg = None
    for path in args.csv:
        try:
            with open(path, "r", encoding="utf-8") as f:
                trace = sim.trace_from_csv(f.read())
        except (OSError, ValueError) as exc:
            print(f"trace error in {path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG_ERROR
        if not trace.rows:
            print(f"trace error in {path}: empty trace", file=sys.stderr)
            return EXIT_CONFIG_ERROR
        traces.append((path, trace))
    if args.config:
        try:
            cfg = load_config(args.config)
        except (OSError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG_ERROR
    else:
        cfg = EnvironmentConfig()
    manifest = RunManifest("plot", config_path=args.config or "",
                           output_paths=[args.out], seed=args.seed)
    svg = render_traces_svg(cfg, traces, manifest)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(svg)
    _say(args, f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sosevade",
        description="Synthesis and validation of robust evader controllers "
                    "via sum-of-squares density certificates.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("synthesize", help="solve the certificate program for a config")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--out", default="certificate.txt")
    common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="re-audit a certificate file by sampling")
    p.add_argument("certificate")
    p.add_argument("--samples", type=int, default=10000)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="closed-loop run of the certified controller")
    p.add_argument("certificate")
    p.add_argument("--strategy", default="tail-chasing",
                   choices=[s.value for s in sim.Strategy])
    p.add_argument("--x0", default="", help="four comma-separated numbers; default: ball centers")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--tmax", type=float, default=2000.0)
    p.add_argument("--out", default="", help="CSV path; stdout when omitted")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export", help="write the program in SDPA sparse format")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--out", default="program.dat-s")
    common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("plot", help="render traces as a deterministic SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("-c", "--config", default="")
    p.add_argument("--out", default="traces.svg")
    common(p)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
