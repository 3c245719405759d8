"""On-disk formats: the choices CSV, posterior JSONL, and report files.

All writers are atomic (temp file in the target directory, then rename) and
byte-deterministic: UTF-8, LF line endings, '.' decimal separator, floats
rendered with repr (shortest round-trip form). The choices CSV schema is
fixed: respondent_id, task_id, the A-side attribute levels and price, the
B-side equivalents, then chose_a as 0/1.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import (
    ground_truth_to_dict,
    model_config_to_dict,
    parse_ground_truth,
    parse_model_config,
)
from .domain import AttributeScheme, ProductProfile, validate_profile
from .errors import DataError
from .infer.design import Standardization
from .infer.diagnostics import Diagnostics
from .infer.fit import PosteriorDraws
from .posterior import WtpDraws, WtpSummary
from .revenue import RevenueCurve
from .simulate import ChoiceDataset, ChoiceRecord, ChoiceTask, GroundTruth, Provenance

POSTERIOR_FORMAT = "conjoint-wtp-posterior"
POSTERIOR_VERSION = 1


def _fmt(value: float) -> str:
    return repr(float(value))


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def choices_header(scheme: AttributeScheme) -> list[str]:
    attrs = [a.name for a in scheme.non_price_attributes]
    return (
        ["respondent_id", "task_id"]
        + [f"a_{name}" for name in attrs]
        + ["a_price"]
        + [f"b_{name}" for name in attrs]
        + ["b_price", "chose_a"]
    )


def write_choices_csv(path: str | Path, dataset: ChoiceDataset) -> None:
    scheme = dataset.scheme
    attrs = [a.name for a in scheme.non_price_attributes]
    rows = [choices_header(scheme)]
    for record in dataset.records:
        task = record.task
        row = [str(task.respondent_id), str(task.task_id)]
        row += [task.profile_a.levels[name] for name in attrs]
        row.append(_fmt(task.profile_a.price))
        row += [task.profile_b.levels[name] for name in attrs]
        row.append(_fmt(task.profile_b.price))
        row.append("1" if record.chose_a else "0")
        rows.append(row)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    atomic_write_text(path, buffer.getvalue())


def read_choices_csv(
    path: str | Path, scheme: AttributeScheme, provenance: Provenance | None = None
) -> ChoiceDataset:
    expected = choices_header(scheme)
    attrs = [a.name for a in scheme.non_price_attributes]
    records: list[ChoiceRecord] = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header != expected:
            raise DataError(
                f"{path}: header mismatch, expected {','.join(expected)} got {','.join(header)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise DataError(f"{path}: row {line_no} has {len(row)} fields, expected {len(expected)}")
            try:
                rid = int(row[0])
                tid = int(row[1])
                offset = 2
                a_levels = dict(zip(attrs, row[offset : offset + len(attrs)]))
                a_price = float(row[offset + len(attrs)])
                offset += len(attrs) + 1
                b_levels = dict(zip(attrs, row[offset : offset + len(attrs)]))
                b_price = float(row[offset + len(attrs)])
                chose_raw = row[-1]
                if chose_raw not in ("0", "1"):
                    raise ValueError(f"chose_a must be 0 or 1, got {chose_raw!r}")
                profile_a = ProductProfile(levels=a_levels, price=a_price)
                profile_b = ProductProfile(levels=b_levels, price=b_price)
                validate_profile(scheme, profile_a)
                validate_profile(scheme, profile_b)
                task = ChoiceTask(
                    respondent_id=rid, task_id=tid, profile_a=profile_a, profile_b=profile_b
                )
                records.append(ChoiceRecord(task=task, chose_a=chose_raw == "1"))
            except DataError:
                raise
            except Exception as e:
                raise DataError(f"{path}: row {line_no}: {e}") from None
    try:
        return ChoiceDataset(scheme=scheme, records=records, provenance=provenance)
    except Exception as e:
        raise DataError(f"{path}: {e}") from None


def write_provenance_json(
    path: str | Path,
    truth: GroundTruth,
    seed: int,
    n_respondents: int,
    tasks_per_respondent: int,
    price_grid: Iterable[float],
) -> None:
    write_json(
        path,
        {
            "seed": seed,
            "ground_truth": ground_truth_to_dict(truth),
            "n_respondents": n_respondents,
            "tasks_per_respondent": tasks_per_respondent,
            "price_grid": [float(p) for p in price_grid],
        },
    )


def read_ground_truth_json(path: str | Path) -> GroundTruth:
    """Accepts either a provenance file or a bare ground-truth document."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise DataError(f"{path}: expected a JSON object")
    if "ground_truth" in data:
        data = data["ground_truth"]
    try:
        return parse_ground_truth(data, path=str(path))
    except Exception as e:
        raise DataError(f"{path}: {e}") from None


def write_posterior_jsonl(path: str | Path, draws: PosteriorDraws) -> None:
    header = {
        "format": POSTERIOR_FORMAT,
        "version": POSTERIOR_VERSION,
        "columns": list(draws.columns),
        "price_column": draws.price_column,
        "respondent_ids": list(draws.respondent_ids),
        "standardization": {
            "mean": draws.standardization.mean.tolist(),
            "scale": draws.standardization.scale.tolist(),
        },
        "config": model_config_to_dict(draws.config),
        "seed": draws.seed,
        "param_layout": "mu, sigma, z (respondent-major)",
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    n = draws.n_draws
    flat_z = draws.z.reshape(n, -1)
    for i in range(n):
        params = np.concatenate([draws.mu[i], draws.sigma[i], flat_z[i]])
        lines.append(
            json.dumps(
                {
                    "chain": int(draws.chain_index[i]),
                    "draw": i,
                    "divergent": bool(draws.divergent[i]),
                    "params": params.tolist(),
                },
                separators=(",", ":"),
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_posterior_jsonl(path: str | Path) -> PosteriorDraws:
    with open(path, encoding="utf-8") as f:
        header_line = f.readline()
        if not header_line:
            raise DataError(f"{path}: empty file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: bad header: {e}") from None
        if header.get("format") != POSTERIOR_FORMAT or header.get("version") != POSTERIOR_VERSION:
            raise DataError(f"{path}: not a {POSTERIOR_FORMAT} v{POSTERIOR_VERSION} file")
        columns = tuple(header["columns"])
        respondent_ids = tuple(int(r) for r in header["respondent_ids"])
        f_dim = len(columns)
        r_dim = len(respondent_ids)
        expected = f_dim * (2 + r_dim)
        mu_rows, sigma_rows, z_rows, chains, divergent = [], [], [], [], []
        for line_no, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                params = np.asarray(obj["params"], dtype=float)
            except Exception as e:
                raise DataError(f"{path}: line {line_no}: {e}") from None
            if params.shape != (expected,):
                raise DataError(
                    f"{path}: line {line_no}: {params.size} parameters, expected {expected}"
                )
            mu_rows.append(params[:f_dim])
            sigma_rows.append(params[f_dim : 2 * f_dim])
            z_rows.append(params[2 * f_dim :])
            chains.append(int(obj["chain"]))
            divergent.append(bool(obj["divergent"]))
    if not mu_rows:
        raise DataError(f"{path}: no draws")
    std = header["standardization"]
    config = parse_model_config(header["config"], seed=int(header["seed"]), path="posterior.config")
    return PosteriorDraws(
        columns=columns,
        price_column=header["price_column"],
        respondent_ids=respondent_ids,
        mu=np.vstack(mu_rows),
        sigma=np.vstack(sigma_rows),
        z=np.vstack(z_rows).reshape(len(mu_rows), r_dim, f_dim),
        standardization=Standardization(
            columns=columns,
            mean=np.asarray(std["mean"], dtype=float),
            scale=np.asarray(std["scale"], dtype=float),
        ),
        chain_index=np.asarray(chains, dtype=int),
        divergent=np.asarray(divergent, dtype=bool),
        config=config,
        seed=int(header["seed"]),
    )


def diagnostics_to_dict(diag: Diagnostics) -> dict:
    return {
        "r_hat": {k: _json_float(v) for k, v in diag.r_hat.items()},
        "effective_sample_size": {
            k: _json_float(v) for k, v in diag.effective_sample_size.items()
        },
        "divergence_count": diag.divergence_count,
        "divergence_rate": diag.divergence_rate,
        "mean_accept_prob": [_json_float(v) for v in diag.mean_accept_prob],
        "warnings": list(diag.warnings),
    }


def _json_float(value: float):
    value = float(value)
    return value if np.isfinite(value) else None


def write_diagnostics_json(path: str | Path, diag: Diagnostics) -> None:
    write_json(path, diagnostics_to_dict(diag))


def write_wtp_summary_csv(
    path: str | Path, summaries: list[WtpSummary], truth: GroundTruth | None = None
) -> None:
    lines = ["feature,true_wtp,mean,hdi_low,hdi_high,hdi_mass,flagged_count"]
    for s in summaries:
        true_val = ""
        if truth is not None and s.feature in truth.true_wtp:
            true_val = _fmt(truth.true_wtp[s.feature])
        lines.append(
            ",".join(
                [
                    s.feature,
                    true_val,
                    _fmt(s.mean),
                    _fmt(s.hdi_low),
                    _fmt(s.hdi_high),
                    _fmt(s.hdi_mass),
                    str(s.flagged_count),
                ]
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_wtp_draws_csv(path: str | Path, wtp_by_feature: list[WtpDraws]) -> None:
    if not wtp_by_feature:
        raise DataError("no WTP draws to write")
    n = {len(w.draws) for w in wtp_by_feature}
    if len(n) != 1:
        raise DataError("WTP draw vectors have mismatched lengths")
    lines = [",".join(w.feature for w in wtp_by_feature)]
    stacked = np.column_stack([w.draws for w in wtp_by_feature])
    for row in stacked:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_revenue_csv(path: str | Path, curve: RevenueCurve) -> None:
    lines = ["price,mean_revenue,hdi_low,hdi_high"]
    for j, price in enumerate(curve.prices):
        lines.append(
            ",".join([_fmt(price), _fmt(curve.mean[j]), _fmt(curve.hdi_low[j]), _fmt(curve.hdi_high[j])])
        )
    atomic_write_text(path, "\n".join(lines) + "\n")
