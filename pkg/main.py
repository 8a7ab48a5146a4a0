"""
SignHDG - Sign-changing HDG Experiments
=======================================
Command line entry point for convergence studies, field output and mesh export.

Usage:
    python main.py study --config config/symmetric.env --k 0,1,2,3
    python main.py study --experiment cavity --method hdg,cg --k 2 --pattern uniform
    python main.py field --config config/metamaterial.env --kappa -1.5
    python main.py mesh --experiment cavity --levels 8 --out meshes
    python main.py experiments
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add project root to path
PROJECT_ROOT = Path(__file__).parent
sys.path.insert(0, str(PROJECT_ROOT))

from errors import SignHdgError  # noqa: E402

logger = logging.getLogger(__name__)


def _config_overrides(args: argparse.Namespace) -> dict:
    """CLI values that were actually given, keyed by RunConfig field."""
    mapping = {
        "experiment": args.experiment,
        "methods": args.method,
        "k": args.k,
        "levels": args.levels,
        "sigma_plus": args.sigma_plus,
        "kappa": args.kappa,
        "gamma": args.gamma,
        "pattern": args.pattern,
        "output_dir": args.out,
        "quadrature_degree": args.quad_degree,
        "workers": args.workers,
        "slice_x2": args.slice_x2,
        "slice_points": args.slice_points,
        "sample_order": args.sample_order,
    }
    return {key: value for key, value in mapping.items() if value is not None}


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', '-c', help='key=value configuration file')
    parser.add_argument('--experiment', '-e', help='cavity, metamaterial or manufactured')
    parser.add_argument('--method', '-m', help='Comma separated methods (hdg, cg)')
    parser.add_argument('--k', help='Comma separated polynomial degrees')
    parser.add_argument('--levels', '-l', help='Comma separated mesh parameters n')
    parser.add_argument('--sigma-plus', type=float, help='Coefficient on the positive subdomain')
    parser.add_argument('--kappa', type=float, help='Contrast sigma_minus / sigma_plus')
    parser.add_argument('--gamma', type=float, help='Stabilization magnitude |tau|')
    parser.add_argument('--pattern', '-p', help='mirrored or uniform diagonals')
    parser.add_argument('--out', '-o', help='Output directory')
    parser.add_argument('--quad-degree', type=int, help='Assembly quadrature degree override')
    parser.add_argument('--workers', '-w', type=int, help='Levels solved concurrently')
    parser.add_argument('--slice-x2', type=float, help='Height of the slice line')
    parser.add_argument('--slice-points', type=int, help='Points on the slice line')
    parser.add_argument('--sample-order', type=int, help='Per-element field sample lattice order')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="SignHDG - HDG with sign-changing stabilization",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    python main.py study --config config/symmetric.env
    python main.py study --experiment cavity --k 1 --levels 8,16,32
    python main.py field --config config/cavity_slice.env
    python main.py mesh --experiment metamaterial --levels 8
    python main.py experiments
        """
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    subparsers = parser.add_subparsers(dest='command', help='Commands')

    # Study command
    study_parser = subparsers.add_parser('study', help='Run refinement studies and write error tables')
    _add_run_arguments(study_parser)

    # Field command
    field_parser = subparsers.add_parser('field', help='Write field samples and a slice for one mesh')
    _add_run_arguments(field_parser)

    # Mesh command
    mesh_parser = subparsers.add_parser('mesh', help='Export the first-level mesh in text format')
    _add_run_arguments(mesh_parser)
    mesh_parser.add_argument('--file', help='Explicit output file')

    # Experiments command
    list_parser = subparsers.add_parser('experiments', help='List experiments and presets')
    list_parser.add_argument('--json', action='store_true', help='Output as JSON')

    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch, and map errors to `error: <module>: <message>`."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    if not args.command:
        parser.print_help()
        return 0

    try:
        return _dispatch(args)
    except SignHdgError as e:
        print(f"error: {e.module}: {e}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    from experiments.study import export_mesh, list_experiments, run_convergence_study, run_field_output
    from utils.run_config import load_config

    if args.command == 'experiments':
        listing = list_experiments(PROJECT_ROOT / "config")
        if args.json:
            print(json.dumps(listing, indent=2))
        else:
            print("\nAvailable experiments:")
            for item in listing:
                exact = "exact solution" if item["exact_solution"] else "no exact solution"
                print(f"  • {item['name']}: bounds {item['bounds']} ({exact})")
                for preset in item["presets"]:
                    print(f"      preset: config/{preset}")
        return 0

    config = load_config(args.config, **_config_overrides(args))

    if args.command == 'study':
        results = run_convergence_study(config)
        status = 0
        for result in results:
            print(f"{result.method} k={result.degree}: {len(result.table.rows)} levels -> {result.csv_path}")
            if not result.ok:
                print(f"error: {result.failure_module}: {result.method} k={result.degree} {result.failure}",
                      file=sys.stderr)
                status = 1
        return status

    if args.command == 'field':
        output = run_field_output(config)
        for method, path in output.field_paths.items():
            print(f"{method} field -> {path}")
        print(f"slice -> {output.slice_path}")
        if output.discrepancy is not None:
            print(f"slice discrepancy D = {output.discrepancy:.6e}")
        return 0

    if args.command == 'mesh':
        path = export_mesh(config, Path(args.file) if args.file else None)
        print(f"mesh -> {path}")
        return 0

    return 0


def main():
    """CLI entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
