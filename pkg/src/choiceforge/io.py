"""File formats: long-format choice CSV, JSON/text reports and curve CSV.

Choice CSV: header ``obs_id,alt_id,chosen,<attributes...>[,construct:<name>...]``
with one row per alternative, rows sorted by ``(obs_id, alt_id)`` and exactly
one ``chosen = 1`` per observation.  Offered alternatives have integer
``alt_id`` values ``0..J-1``; the no-purchase option, when present, is the
last row of each observation with ``alt_id = outside`` and zero attributes.
Floats are written with ``repr`` so files re-parse to identical values.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import PRICE, AttributeSchema, ChoiceDataset, ParameterVector
from .errors import InputError

OUTSIDE = "outside"
CONSTRUCT_PREFIX = "construct:"
CURVE_HEADER = ("price", "utility", "probability", "revenue")
KEY_COLUMNS = ("obs_id", "alt_id", "chosen")


def _fmt(x) -> str:
    return repr(float(x))


def write_dataset(data: ChoiceDataset, path) -> None:
    constructs = data.constructs
    header = list(KEY_COLUMNS) + list(data.schema.names)
    header += [CONSTRUCT_PREFIX + c for c in data.construct_names]
    n, J, K = data.attributes.shape
    zeros = [_fmt(0.0)] * (K + len(data.construct_names))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            for j in range(J):
                row = [str(i), str(j), "1" if data.chosen[i] == j else "0"]
                row += [_fmt(v) for v in data.attributes[i, j]]
                if constructs is not None:
                    row += [_fmt(v) for v in constructs[i, j]]
                w.writerow(row)
            if data.outside_option:
                w.writerow([str(i), OUTSIDE, "1" if data.chosen[i] == J else "0"] + zeros)


def _cell_float(value, line, column):
    try:
        x = float(value)
    except ValueError:
        raise InputError(f"row {line}, column '{column}': '{value}' is not a number") from None
    if not np.isfinite(x):
        raise InputError(f"row {line}, column '{column}': value must be finite")
    return x


def read_dataset(path) -> ChoiceDataset:
    """Parse a long-format choice CSV; errors name the offending row and column.

    Row numbers count the header as row 1.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"dataset file '{path}' not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"dataset '{path}' is empty") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    if tuple(header[:3]) != KEY_COLUMNS:
        raise InputError(f"row 1: header must start with {','.join(KEY_COLUMNS)}")
    attr_cols = [h for h in header[3:] if not h.startswith(CONSTRUCT_PREFIX)]
    cons_cols = [h for h in header[3:] if h.startswith(CONSTRUCT_PREFIX)]
    if header[3:] != attr_cols + cons_cols:
        raise InputError("row 1: construct columns must follow the attribute columns")
    if PRICE not in attr_cols:
        raise InputError("row 1: missing 'price' column")
    schema = AttributeSchema(tuple(attr_cols))
    K, C = len(attr_cols), len(cons_cols)
    if not rows:
        raise InputError(f"dataset '{path}' has no observations")

    obs_rows: list[list] = []
    last_obs = None
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != len(header):
            raise InputError(f"row {line}: expected {len(header)} columns, found {len(row)}")
        obs = row[0].strip()
        try:
            obs_id = int(obs)
        except ValueError:
            raise InputError(f"row {line}, column 'obs_id': '{obs}' is not an integer") from None
        if obs_id != last_obs:
            if last_obs is not None and obs_id <= last_obs:
                raise InputError(f"row {line}, column 'obs_id': rows must be sorted by obs_id")
            obs_rows.append([])
            last_obs = obs_id
        obs_rows[-1].append((line, obs_id, row))

    attributes, constructs, chosen = [], [], []
    outside_flags = set()
    n_alt = None
    for group in obs_rows:
        inside, has_outside, pick = [], False, None
        for pos, (line, obs_id, row) in enumerate(group):
            alt = row[1].strip()
            flag = row[2].strip()
            if flag not in ("0", "1"):
                raise InputError(f"row {line}, column 'chosen': expected 0 or 1, found '{flag}'")
            if alt == OUTSIDE:
                if pos != len(group) - 1:
                    raise InputError(f"row {line}, column 'alt_id': the outside option must be last")
                has_outside = True
            else:
                try:
                    a = int(alt)
                except ValueError:
                    raise InputError(f"row {line}, column 'alt_id': '{alt}' is not an integer or '{OUTSIDE}'") from None
                if a != len(inside):
                    raise InputError(f"row {line}, column 'alt_id': expected {len(inside)}, found {a}")
                values = [_cell_float(v, line, c) for v, c in zip(row[3:3 + K], attr_cols)]
                cvals = [_cell_float(v, line, c) for v, c in zip(row[3 + K:], cons_cols)]
                inside.append((values, cvals))
            if flag == "1":
                if pick is not None:
                    raise InputError(f"row {line}, column 'chosen': observation {obs_id} has two chosen rows")
                pick = pos
        first_line, obs_id = group[0][0], group[0][1]
        if pick is None:
            raise InputError(f"row {first_line}, column 'chosen': observation {obs_id} has no chosen row")
        if n_alt is None:
            n_alt = len(inside)
        elif len(inside) != n_alt:
            raise InputError(f"row {first_line}, column 'alt_id': observation {obs_id} has "
                             f"{len(inside)} alternatives, expected {n_alt}")
        outside_flags.add(has_outside)
        attributes.append([v for v, _ in inside])
        constructs.append([c for _, c in inside])
        chosen.append(pick)
    if len(outside_flags) > 1:
        raise InputError("column 'alt_id': the outside option must appear in every observation or none")
    if n_alt == 0:
        raise InputError("column 'alt_id': observations need at least one offered alternative")
    names = tuple(c[len(CONSTRUCT_PREFIX):] for c in cons_cols)
    return ChoiceDataset(schema, np.array(attributes, dtype=float), np.array(chosen),
                         outside_flags.pop(), np.array(constructs, dtype=float) if C else None, names)


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"report file '{path}' not found")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"'{path}' is not valid JSON: {exc}") from None


def write_text(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(base, payload: dict, lines) -> tuple[Path, Path]:
    """Write ``<base>.json`` and ``<base>.txt``; a trailing ``.json`` on ``base`` is dropped."""
    base = Path(base)
    if base.suffix == ".json":
        base = base.with_suffix("")
    json_path, text_path = base.with_name(base.name + ".json"), base.with_name(base.name + ".txt")
    write_json(json_path, payload)
    write_text(text_path, lines)
    return json_path, text_path


def params_to_dict(params: ParameterVector) -> dict:
    return {"betas": params.as_dict(), "alternative_constants": params.alternative_constants.tolist()}


def params_from_dict(payload: dict, attributes=None) -> ParameterVector:
    try:
        betas = payload["betas"]
        names = tuple(attributes) if attributes is not None else tuple(betas)
        values = [float(betas[n]) for n in names]
        constants = [float(c) for c in payload.get("alternative_constants", [0.0])]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed parameter record: {exc}") from None
    return ParameterVector(values, AttributeSchema(names), constants)


def _sig9(x: float) -> str:
    return f"{x:.9g}"


def write_curve(path, curve) -> None:
    """Curve CSV with 9 significant digits.

    Revenue is the product of the rounded price and probability, so each
    row is self-consistent up to the rounding of the revenue cell itself.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for price, utility, prob, _ in curve:
            p, q = _sig9(price), _sig9(prob)
            w.writerow([p, _sig9(utility), q, _sig9(float(p) * float(q))])


def read_curve(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CURVE_HEADER:
            raise InputError(f"curve header must be {','.join(CURVE_HEADER)}")
        return np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, 4)
