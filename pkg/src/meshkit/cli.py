"""Command-line tools: grid inspection, mesh generation and partition plots.

Exit codes: 0 success, 2 usage or parse error, 3 unsupported combination,
1 internal error.  ``MESHKIT_DEBUG=1`` turns on debug logging to stderr.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import GridNameError, InvalidArgument, InvalidSpec, MeshkitError, NotFoundError, ProjectionDomainError, UnsupportedGrid
from .grid import make_grid, register_pl_table
from .meshgen import generate_structured_mesh
from .parallel import SimComm
from .partition import PARTITIONERS, partition_grid

log = logging.getLogger("meshkit.cli")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_UNSUPPORTED = 0, 1, 2, 3
GOLDEN_ANGLE = 137.508
SVG_WIDTH, SVG_HEIGHT = 720, 360


class UsageError(MeshkitError):
    pass


def debug_enabled(environ=None) -> bool:
    value = (environ if environ is not None else os.environ).get("MESHKIT_DEBUG", "0").strip()
    return value not in ("", "0")


def _load_grid(arg, pl_table=None):
    if pl_table:
        register_pl_table(pl_table)
    if os.path.isfile(arg):
        log.debug("reading grid spec from %s", arg)
        return make_grid(Path(arg).read_text(encoding="utf-8"))
    return make_grid(arg)


def _grid_label(arg):
    return Path(arg).stem if os.path.isfile(arg) else arg


# --- grids ---------------------------------------------------------------


def grid_info(grid) -> str:
    cls = grid.classification
    lines = [
        f"name: {grid.name}",
        f"type: {grid.type}",
        f"classification: {','.join(cls.flags())}",
        f"size: {grid.size}",
    ]
    if grid.structured:
        lines.append(f"ny: {grid.ny}")
    lines.append(f"uid: {grid.uid}")
    return "\n".join(lines) + "\n"


def grid_points(grid):
    """Yield "n x y lon lat" lines."""
    xy = grid.xy_array()
    ll = grid.lonlat_array()
    for n in range(grid.size):
        yield f"{n} {xy[n, 0]:.12g} {xy[n, 1]:.12g} {ll[n, 0]:.12g} {ll[n, 1]:.12g}\n"


def cmd_grids(args, out):
    grid = _load_grid(args.grid, args.pl_table)
    if not (args.info or args.points or args.json):
        args.info = True
    if args.info:
        out.write(grid_info(grid))
    if args.json:
        out.write(grid.to_json() + "\n")
    if args.points:
        out.writelines(grid_points(grid))
    return EXIT_OK


# --- meshgen -------------------------------------------------------------


def output_paths(template, parts, nb_parts, ext):
    """File name per partition.

    ``{part}`` in the template is replaced by the partition index; otherwise
    a ``_p{k}`` suffix is added when the run writes more than one partition
    of a distributed mesh.
    """
    paths = {}
    for p in parts:
        if "{part}" in template:
            name = template.replace("{part}", str(p))
        elif nb_parts > 1:
            path = Path(template)
            suffix = path.suffix or f".{ext}"
            name = str(path.with_name(f"{path.stem}_p{p}{suffix}"))
        else:
            name = template
        paths[p] = name
    if len(set(paths.values())) != len(paths):
        raise UsageError(f"output template {template!r} maps several partitions to one file")
    return paths


def _render_mesh(mesh, fmt):
    if fmt == "gmsh":
        from .mesh import gmsh_string

        return gmsh_string(mesh)
    return mesh.to_json() + "\n"


def cmd_meshgen(args, out):
    if args.partitions < 1:
        raise UsageError("--partitions must be >= 1")
    if args.halo < 0:
        raise UsageError("--halo must be >= 0")
    grid = _load_grid(args.grid, args.pl_table)
    dist = partition_grid(grid, args.partitions, args.partitioner)
    P = dist.nb_partitions
    if args.part is not None and not 0 <= args.part < P:
        raise UsageError(f"--part {args.part} outside 0..{P - 1}")
    parts = [args.part] if args.part is not None else list(range(P))
    ext = "msh" if args.format == "gmsh" else "json"
    template = args.output or (f"{_grid_label(args.grid)}.{ext}")
    to_stdout = template == "-"
    if to_stdout and len(parts) > 1:
        raise UsageError("writing to stdout needs a single partition; pass --part")
    paths = {} if to_stdout else output_paths(template, parts, P, ext)

    def rank_task(ctx):
        if ctx.rank not in parts:
            return None
        log.debug("rank %d generating its mesh", ctx.rank)
        mesh = generate_structured_mesh(
            grid, dist, ctx.rank, halo=args.halo, pole_elements=args.pole_elements, edges=args.edges
        )
        return _render_mesh(mesh, args.format)

    texts = SimComm(P, sequential=True).run(rank_task)
    for p in parts:
        if to_stdout:
            out.write(texts[p])
            continue
        with open(paths[p], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(texts[p])
        out.write(f"{paths[p]}\n")
    return EXIT_OK


# --- partition -----------------------------------------------------------


def partition_svg(grid, dist) -> str:
    """Equirectangular scatter of the grid points coloured by partition."""
    ll = grid.lonlat_array()
    sx = SVG_WIDTH / 360.0
    sy = SVG_HEIGHT / 180.0
    radius = max(0.6, min(3.0, 0.5 * SVG_WIDTH / max(1.0, grid.size**0.5 * 2.0)))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" '
        f'width="{SVG_WIDTH}" height="{SVG_HEIGHT}">',
        f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
    ]
    for n in range(grid.size):
        lon = ll[n, 0] % 360.0
        x = lon * sx
        y = (90.0 - ll[n, 1]) * sy
        hue = (int(dist.part[n]) * GOLDEN_ANGLE) % 360.0
        lines.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius:.2f}" fill="hsl({hue:.3f},70%,50%)"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_partition(args, out):
    if args.partitions < 1:
        raise UsageError("--partitions must be >= 1")
    grid = _load_grid(args.grid, args.pl_table)
    dist = partition_grid(grid, args.partitions, args.partitioner)
    if args.svg:
        Path(args.svg).write_text(partition_svg(grid, dist), encoding="utf-8", newline="\n")
        out.write(f"{args.svg}\n")
    if args.json:
        Path(args.json).write_text(dist.to_json() + "\n", encoding="utf-8", newline="\n")
        out.write(f"{args.json}\n")
    log.debug("partition counts %s", dist.counts.tolist())
    return EXIT_OK


# --- entry point ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="meshkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def grid_arg(p):
        p.add_argument("grid", help="grid name (O32, F16, L360x181, ...) or path of a JSON grid spec")
        p.add_argument("--pl-table", help="JSON file of classic reduced Gaussian pl arrays")

    g = sub.add_parser("grids", help="inspect a grid")
    grid_arg(g)
    g.add_argument("--info", action="store_true", help="summary (default)")
    g.add_argument("--points", action="store_true", help='stream "n x y lon lat" lines')
    g.add_argument("--json", action="store_true", help="canonical grid spec")
    g.set_defaults(func=cmd_grids)

    def partition_args(p):
        p.add_argument("--partitions", "-P", type=int, default=1)
        p.add_argument("--partitioner", default="equal_regions", choices=sorted(PARTITIONERS))

    m = sub.add_parser("meshgen", help="generate and export mesh partitions")
    grid_arg(m)
    partition_args(m)
    m.add_argument("--halo", type=int, default=0)
    m.add_argument("--part", type=int, help="only this partition")
    m.add_argument("--format", choices=("gmsh", "json"), default="gmsh")
    m.add_argument("--output", "-o", help="file name, may contain {part}; '-' for stdout")
    m.add_argument("--pole-elements", action="store_true", help="close the mesh at the poles")
    m.add_argument("--edges", action="store_true", help="include edges (json only)")
    m.set_defaults(func=cmd_meshgen)

    p = sub.add_parser("partition", help="partition a grid and write an SVG plot or JSON distribution")
    grid_arg(p)
    partition_args(p)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--svg", help="SVG output file")
    target.add_argument("--json", help="JSON distribution output file")
    p.set_defaults(func=cmd_partition)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    if debug_enabled():
        logging.basicConfig(level=logging.DEBUG, stream=err, format="%(name)s %(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except (UsageError, GridNameError, InvalidSpec, InvalidArgument, NotFoundError) as exc:
        err.write(f"meshkit: error: {exc}\n")
        return EXIT_USAGE
    except (UnsupportedGrid, ProjectionDomainError) as exc:
        err.write(f"meshkit: unsupported: {exc}\n")
        return EXIT_UNSUPPORTED
    except (OSError, json.JSONDecodeError) as exc:
        err.write(f"meshkit: error: {exc}\n")
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("internal error", exc_info=True)
        err.write(f"meshkit: internal error: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
