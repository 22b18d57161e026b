"""Command-line surface: analyze | mask | decompress | sweep | correlate | synth.

Exit codes: 0 success, 1 usage or invalid fixture spec, 2 unreadable or
malformed container, 3 no adapter pairs found, 4 every update matrix is
zero, 5 not-spectral or corrupt sparse input, 6 degenerate statistics.
Diagnostics go to stderr; stdout carries only the storage accounting.

Every output file is written to a temp name in the target directory and
renamed into place, so interrupted runs never leave truncated files.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import codec, report
from .analysis import reconstruct, sweep, topk_mask
from .container import (
    AdapterFile,
    TensorRecord,
    merge_delta,
    read_container,
    write_container,
)
from .dct import dct2
from .errors import (
    ContainerError,
    CorruptSparse,
    DegenerateInput,
    InvalidSpec,
    LorafreqError,
    NotSpectralFile,
    ShapeMismatch,
    ZeroSpectrum,
)
from .fixtures import KINDS, FixtureSpec, generate_set, ramp_specs, repeat_specs

_MAX_SEED = 2**64 - 1


class _NoPairsError(Exception):
    pass


_EXIT_BY_TYPE = (
    (InvalidSpec, 1),
    (_NoPairsError, 3),
    (ZeroSpectrum, 4),
    (NotSpectralFile, 5),
    (CorruptSparse, 5),
    (DegenerateInput, 6),
    (ContainerError, 2),
    (ShapeMismatch, 2),
)

_scale_option = click.option(
    "--scale",
    type=click.FloatRange(0, min_open=True),
    default=None,
    help="Override the metadata-derived alpha/r merge scale.",
)
_threads_option = click.option(
    "--threads",
    type=click.IntRange(1),
    default=None,
    help="Worker threads for per-matrix stages [default: logical cores].",
)


@click.group()
def cli():
    """Frequency-domain analysis and compression of low-rank adapter updates."""


@cli.command("analyze")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--out",
    required=True,
    type=click.Path(file_okay=False),
    help="Output directory for report.json and curve CSVs.",
)
@click.option(
    "--energy-target",
    type=click.FloatRange(0, 1, min_open=True),
    default=0.9,
    show_default=True,
    help="Cumulative energy fraction defining the k threshold.",
)
@_scale_option
@_threads_option
def cmd_analyze(input, out, energy_target, scale, threads):
    """Report spectral energy concentration per adapter matrix."""
    pairs, applied = _load_pairs(input, scale)
    rows_curves = report.analysis_rows(pairs, energy_target, _workers(threads))
    doc = report.analysis_report(input, pairs, rows_curves, applied)

    out_dir = Path(out)
    _write_text(out_dir / "report.json", _json_text(doc))
    combined: list[tuple] = []
    for i, (pair, (row, curve)) in enumerate(zip(pairs, rows_curves)):
        points = report.curve_points(curve)
        if not points:
            click.echo(
                f"warning: {pair.prefix} is a zero update; curve is empty",
                err=True,
            )
        name = f"matrix_{i:03d}_{_slug(pair.prefix)}.curve.csv"
        _write_text(
            out_dir / name,
            _csv_text(("coefficient_rank_percent", "cumulative_fraction"), points),
        )
        combined.extend((pair.prefix, p, f) for p, f in points)
    _write_text(
        out_dir / "curves_combined.csv",
        _csv_text(
            ("matrix_prefix", "coefficient_rank_percent", "cumulative_fraction"),
            combined,
        ),
    )
    click.echo(f"analyzed {len(pairs)} matrices into {out}", err=True)


@cli.command("mask")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--k",
    required=True,
    type=click.FloatRange(0, 100, min_open=True),
    help="Percentage of coefficients to retain, in (0, 100].",
)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option(
    "--emit",
    type=click.Choice(["sparse", "dense"]),
    default="sparse",
    show_default=True,
    help="sparse: spectral coefficient file; dense: reconstructed updates.",
)
@click.option(
    "--base-params",
    type=click.IntRange(1),
    default=None,
    help="Base parameter count for the k%-of-base storage accounting "
    "[default: total dense update size].",
)
@_scale_option
@_threads_option
def cmd_mask(input, k, out, emit, base_params, scale, threads):
    """Keep the top-k% spectrum of each update and write the result."""
    pairs, _ = _load_pairs(input, scale)

    def one(pair):
        delta = merge_delta(pair)
        spectrum = dct2(delta)
        if not np.any(spectrum.coefficients.data):
            return pair, None, None
        return pair, spectrum, topk_mask(spectrum, k)

    results = _pmap(one, pairs, threads)
    live = [(p, f, m) for p, f, m in results if m is not None]
    for pair, _, m in results:
        if m is None:
            click.echo(f"warning: skipping zero update {pair.prefix}", err=True)
    if not live:
        raise ZeroSpectrum("every update matrix in the input is zero")

    base = base_params or sum(p.out_shape[0] * p.out_shape[1] for p in pairs)
    accounting = codec.storage_report(base, k, [m.k_count for _, _, m in live])

    if emit == "sparse":
        spectra = [codec.encode_sparse(p.prefix, f, m) for p, f, m in live]
        out_file = codec.pack_sparse_file(spectra)
    else:
        tensors = []
        for pair, spectrum, m in live:
            recon = reconstruct(spectrum, m)
            tensors.append(
                TensorRecord(f"{pair.prefix}.delta_w", "F64", recon.shape, recon.array)
            )
        out_file = AdapterFile(tensors=tuple(tensors), metadata={})
    _write_bytes(Path(out), write_container(out_file))

    click.echo(
        f"nominal accounting: base {accounting.base_param_count} parameters, "
        f"stored {accounting.nominal_stored} ({accounting.nominal_reduction:.1f}x)"
    )
    click.echo(
        f"coefficient accounting: {accounting.coeff_value_count} values, "
        f"{accounting.coeff_total_units} stored units "
        f"({accounting.coeff_reduction:.1f}x)"
    )
    if accounting.exceeds_base:
        click.echo(
            "note: index+value storage exceeds the dense parameter count at this k",
            err=True,
        )


@cli.command("decompress")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_threads_option
def cmd_decompress(input, out, threads):
    """Reconstruct dense updates from a sparse spectral file."""
    file = read_container(Path(input).read_bytes())
    spectra = codec.unpack_sparse_file(file)

    def one(s):
        dense = codec.decode_sparse(s)
        return TensorRecord(f"{s.name}.delta_w", "F64", dense.shape, dense.array)

    tensors = _pmap(one, spectra, threads)
    out_file = AdapterFile(tensors=tuple(tensors), metadata={})
    _write_bytes(Path(out), write_container(out_file))
    click.echo(f"decompressed {len(tensors)} matrices into {out}", err=True)


@cli.command("sweep")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--k-list",
    required=True,
    callback=lambda ctx, param, value: _parse_k_list(value),
    help="Comma-separated k percentages, each in (0, 100].",
)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_scale_option
@_threads_option
def cmd_sweep(input, k_list, out, scale, threads):
    """Tabulate reconstruction error against the frequency budget k."""
    pairs, _ = _load_pairs(input, scale)

    def one(pair):
        delta = merge_delta(pair)
        if not np.any(delta.data):
            return pair, None
        return pair, sweep(delta, k_list)

    results = _pmap(one, pairs, threads)
    for pair, points in results:
        if points is None:
            click.echo(f"warning: skipping zero update {pair.prefix}", err=True)
    live = [(pair, points) for pair, points in results if points is not None]
    if not live:
        raise ZeroSpectrum("every update matrix in the input is zero")

    rows = [
        (pair.prefix, pt.k_percent, pt.relative_error, pt.retained_energy_fraction)
        for pair, points in sorted(live, key=lambda item: item[0].prefix)
        for pt in points
    ]
    _write_text(
        Path(out),
        _csv_text(
            ("matrix_prefix", "k", "relative_error", "retained_energy_fraction"),
            rows,
        ),
    )
    click.echo(f"swept {len(live)} matrices at {len(k_list)} budgets", err=True)


@cli.command("correlate")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_scale_option
@_threads_option
def cmd_correlate(input, out, scale, threads):
    """Correlate SVD-based and DCT-based k90 across matrices."""
    pairs, applied = _load_pairs(input, scale)
    doc = report.correlate_report(input, pairs, applied, _workers(threads))
    _write_text(Path(out), _json_text(doc))
    click.echo(
        f"pearson {doc['pearson']:.4f}, spearman {doc['spearman']:.4f}, "
        f"n {doc['n']}",
        err=True,
    )


@cli.command("synth")
@click.option("--kind", required=True, type=click.Choice(KINDS))
@click.option("--m", required=True, type=click.IntRange(1))
@click.option("--n", required=True, type=click.IntRange(1))
@click.option("--r", type=click.IntRange(1), default=1, show_default=True)
@click.option("--seed", type=click.IntRange(0, _MAX_SEED), default=0, show_default=True)
@click.option(
    "--count",
    type=click.IntRange(1),
    default=1,
    show_default=True,
    help="Pairs to emit, one layer index each, at consecutive seeds.",
)
@click.option(
    "--noise-level",
    type=click.FloatRange(0),
    default=0.0,
    show_default=True,
    help="Factor perturbation for the mixed kind.",
)
@click.option(
    "--rank-ramp",
    is_flag=True,
    help="Ramp ranks 1..count across layers instead of using --r.",
)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_synth(kind, m, n, r, seed, count, noise_level, rank_ramp, out):
    """Generate a deterministic synthetic adapter container."""
    if rank_ramp:
        specs = ramp_specs(kind, m, n, count, seed, noise_level)
    else:
        base = FixtureSpec(
            kind=kind, m=m, n=n, r=r, seed=seed, noise_level=noise_level
        )
        specs = repeat_specs(base, count)
    _write_bytes(Path(out), write_container(generate_set(specs)))
    click.echo(f"wrote {count} pair(s) to {out}", err=True)


def main(argv=None) -> int:
    """Entry point mapping domain errors onto documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except (LorafreqError, _NoPairsError) as exc:
        for kind, code in _EXIT_BY_TYPE:
            if isinstance(exc, kind):
                click.echo(f"error: {exc}", err=True)
                return code
        raise
    return 0


def _load_pairs(path: str, scale):
    file = read_container(Path(path).read_bytes())
    pairs, orphans = report.effective_pairs(file, scale)
    for orphan in orphans:
        click.echo(f"warning: unpaired factor {orphan.tensor_name}", err=True)
    if not pairs:
        raise _NoPairsError(f"no lora_A/lora_B pairs found in {path}")
    applied = scale if scale is not None else pairs[0].scale
    return pairs, applied


def _workers(threads) -> int:
    return threads if threads else (os.cpu_count() or 1)


def _pmap(fn, items, threads):
    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        return list(pool.map(fn, items))


def _parse_k_list(value: str) -> list[float]:
    tokens = [tok.strip() for tok in value.split(",") if tok.strip()]
    if not tokens:
        raise click.BadParameter("k list is empty")
    try:
        ks = [float(tok) for tok in tokens]
    except ValueError as exc:
        raise click.BadParameter(f"not a number: {exc}") from exc
    for k in ks:
        if not 0.0 < k <= 100.0:
            raise click.BadParameter(f"k must be in (0, 100], got {k}")
    return sorted(set(ks))


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)[:80]


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _write_text(path: Path, text: str) -> None:
    _write_bytes(path, text.encode("utf-8"))
