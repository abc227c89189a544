"""File formats: manifold files, scan CSVs, eigenmode records, manifests.

Every file starts with a one-line schema header "<kind> <version>";
parsers reject unknown kinds and versions.  Floats are written with 17
significant digits so reading a file back reproduces the exact values.
"""

from __future__ import annotations

import json

import numpy as np

from .basis import ModeCoefficients, coeff_index, lm_of_index
from .geometry import GeometryError, Isometry
from .tiling import GeneratorSet, ManifoldSpec, TilingError

SCHEMA_VERSION = 1
MANIFOLD_KIND = "hyperdrum-manifold"
SCAN_KIND = "hyperdrum-scan"
MODE_KIND = "hyperdrum-mode"
REPORT_KIND = "hyperdrum-report"
MANIFEST_KIND = "hyperdrum-manifest"
SPECTRUM_KIND = "hyperdrum-spectrum"
SLICE_KIND = "hyperdrum-slice"
SPHERE_KIND = "hyperdrum-sphere"

_META_FLOAT = ("volume", "diameter", "geodesic")
_META_STR = ("symmetry", "census")


class FormatError(ValueError):
    """Malformed or unsupported input file."""


def fmt(x) -> str:
    return "%.17g" % float(x)


def _check_header(line: str, kind: str, path) -> None:
    parts = line.strip().split()
    if len(parts) != 2 or parts[0] != kind:
        raise FormatError("%s: expected '%s <version>' header, got %r"
                          % (path, kind, line.strip()))
    if parts[1] != str(SCHEMA_VERSION):
        raise FormatError("%s: unsupported %s schema version %s"
                          % (path, kind, parts[1]))


def parse_manifold(path) -> ManifoldSpec:
    """Read a manifold file: name, optional metadata, generator blocks.

    Each generator is validated as an SO(3,1) isometry; the identity
    and duplicates are rejected; missing inverses are appended.
    """
    with open(path) as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in raw if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise FormatError("%s: empty file" % path)
    _check_header(lines[0], MANIFOLD_KIND, path)

    name = None
    meta = {}
    gens = []
    labels = []
    i = 1
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        rest = rest.strip()
        if key == "name":
            name = rest
            i += 1
        elif key in _META_FLOAT:
            try:
                meta[key] = float(rest)
            except ValueError:
                raise FormatError("%s: bad %s value %r" % (path, key, rest))
            i += 1
        elif key in _META_STR:
            meta[key] = rest
            i += 1
        elif key == "generator":
            label = rest or None
            rows = []
            for r in range(1, 5):
                if i + r >= len(lines):
                    raise FormatError("%s: generator %r: matrix block "
                                      "truncated" % (path, label))
                vals = lines[i + r].split()
                if len(vals) != 4:
                    raise FormatError("%s: generator %r row %d: expected 4 "
                                      "entries, got %d"
                                      % (path, label, r, len(vals)))
                try:
                    rows.append([float(v) for v in vals])
                except ValueError:
                    raise FormatError("%s: generator %r row %d: malformed "
                                      "float" % (path, label, r))
            m = np.array(rows)
            try:
                iso = Isometry(m)
            except GeometryError as e:
                raise FormatError("%s: generator %r: %s" % (path, label, e))
            if iso.g00 <= 1.0 + 1e-9:
                raise FormatError("%s: generator %r: identity generator"
                                  % (path, label))
            for j, h in enumerate(gens):
                if np.max(np.abs(h.matrix - iso.matrix)) < 1e-8:
                    raise FormatError("%s: generator %r duplicates %r"
                                      % (path, label, labels[j]))
            gens.append(iso)
            labels.append(label)
            i += 5
        else:
            raise FormatError("%s: unknown key %r" % (path, key))
    if name is None:
        raise FormatError("%s: missing name" % path)
    if not gens:
        raise FormatError("%s: no generators" % path)
    if any(lb is None for lb in labels):
        labels = None
    try:
        gset = GeneratorSet.from_generators(gens, labels)
    except TilingError as e:
        raise FormatError("%s: %s" % (path, e))
    return ManifoldSpec(name=name, gens=gset,
                        volume=meta.get("volume"),
                        diameter=meta.get("diameter"),
                        geodesic=meta.get("geodesic"),
                        symmetry=meta.get("symmetry"),
                        extra={"census": meta["census"]}
                        if "census" in meta else {})


def write_manifold(path, spec: ManifoldSpec, only_one_per_pair=True) -> None:
    """Write a manifold file; by default one generator per inverse pair
    (the parser restores the inverses)."""
    out = ["%s %d" % (MANIFOLD_KIND, SCHEMA_VERSION), "name %s" % spec.name]
    for key in _META_FLOAT:
        val = getattr(spec, key)
        if val is not None:
            out.append("%s %s" % (key, fmt(val)))
    if spec.symmetry is not None:
        out.append("symmetry %s" % spec.symmetry)
    if spec.extra.get("census"):
        out.append("census %s" % spec.extra["census"])
    skip = set()
    for i, (g, lab) in enumerate(zip(spec.gens.elements, spec.gens.labels)):
        if i in skip:
            continue
        if only_one_per_pair:
            skip.add(spec.gens.inverse_index[i])
        out.append("generator %s" % lab)
        for row in g.matrix:
            out.append(" ".join(fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def write_scan_csv(path, ks, chi2, params, config=None) -> None:
    """Scan output: one row per grid k.

    chi2 is (npts, n_keep); params is a list of dicts with keys
    L, M, N, rho_min, rho_max.  config, when given, is echoed into a
    comment line so a later refine run can rebuild the exact scan
    settings from the CSV alone.
    """
    n_keep = chi2.shape[1]
    cols = ["k"] + ["chi2_%d" % (j + 1) for j in range(n_keep)] \
        + ["L", "M", "N", "rho_min", "rho_max"]
    out = ["# %s %d" % (SCAN_KIND, SCHEMA_VERSION)]
    if config is not None:
        out.append("# config %s" % json.dumps(config, sort_keys=True))
    out.append(",".join(cols))
    for i, k in enumerate(ks):
        p = params[i]
        row = [fmt(k)] + [fmt(v) for v in chi2[i]] \
            + [str(p["L"]), str(p["M"]), str(p["N"]),
               fmt(p["rho_min"]), fmt(p["rho_max"])]
        out.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def read_scan_csv(path):
    """Returns (ks, chi2 array, params list, config dict or None)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise FormatError("%s: missing scan header" % path)
    _check_header(lines[0].lstrip("# "), SCAN_KIND, path)
    config = None
    body = 1
    if len(lines) > 1 and lines[1].startswith("# config "):
        try:
            config = json.loads(lines[1][len("# config "):])
        except json.JSONDecodeError:
            raise FormatError("%s: malformed config echo" % path)
        body = 2
    header = lines[body].split(",")
    if header[0] != "k" or "L" not in header:
        raise FormatError("%s: bad scan column header" % path)
    nk = header.index("L") - 1
    ks, chi2, params = [], [], []
    for ln in lines[body + 1:]:
        vals = ln.split(",")
        if len(vals) != len(header):
            raise FormatError("%s: ragged scan row" % path)
        ks.append(float(vals[0]))
        chi2.append([float(v) for v in vals[1:1 + nk]])
        params.append({"L": int(vals[1 + nk]), "M": int(vals[2 + nk]),
                       "N": int(vals[3 + nk]),
                       "rho_min": float(vals[4 + nk]),
                       "rho_max": float(vals[5 + nk])})
    return np.array(ks), np.array(chi2), params, config


def write_mode(path, manifold_name, k, multiplicity, chi2, vectors, L) -> None:
    """Eigenmode record: k, q2, multiplicity, L, then (l, m, a) lines."""
    out = ["%s %d" % (MODE_KIND, SCHEMA_VERSION),
           "manifold %s" % manifold_name,
           "k %s" % fmt(k),
           "q2 %s" % fmt(k * k + 1.0),
           "multiplicity %d" % multiplicity,
           "L %d" % L,
           "chi2 %s" % fmt(chi2)]
    for vi, vec in enumerate(vectors):
        out.append("vector %d" % vi)
        for i, a in enumerate(vec):
            l, m = lm_of_index(i)
            out.append("%d %d %s" % (l, m, fmt(a)))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def read_mode(path):
    """Returns dict with manifold, k, q2, multiplicity, L, chi2,
    modes: list of ModeCoefficients."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise FormatError("%s: empty mode file" % path)
    _check_header(lines[0], MODE_KIND, path)
    rec = {}
    vectors = []
    cur = None
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "manifold":
            rec["manifold"] = rest.strip()
        elif key in ("k", "q2", "chi2"):
            rec[key] = float(rest)
        elif key in ("multiplicity", "L"):
            rec[key] = int(rest)
        elif key == "vector":
            cur = []
            vectors.append(cur)
        else:
            parts = ln.split()
            if len(parts) != 3 or cur is None:
                raise FormatError("%s: bad coefficient line %r" % (path, ln))
            l, m, a = int(parts[0]), int(parts[1]), float(parts[2])
            if coeff_index(l, m) != len(cur):
                raise FormatError("%s: coefficient (l=%d, m=%d) out of order"
                                  % (path, l, m))
            cur.append(a)
    L = rec.get("L")
    if L is None or "k" not in rec:
        raise FormatError("%s: missing k or L" % path)
    n = (L + 1) ** 2
    modes = []
    for vec in vectors:
        if len(vec) != n:
            raise FormatError("%s: vector length %d, expected %d"
                              % (path, len(vec), n))
        modes.append(ModeCoefficients(rec["k"], L, np.array(vec)))
    if len(modes) != rec.get("multiplicity", len(modes)):
        raise FormatError("%s: multiplicity disagrees with vector count"
                          % path)
    rec["modes"] = modes
    return rec


def read_spectrum(path):
    """Eigenvalue list fixture: (q2, multiplicity) rows sorted by q2."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise FormatError("%s: missing spectrum header" % path)
    _check_header(lines[0].lstrip("# "), SPECTRUM_KIND, path)
    if lines[1] != "q2,multiplicity":
        raise FormatError("%s: bad spectrum column header" % path)
    out = []
    for ln in lines[2:]:
        q2, _, mult = ln.partition(",")
        out.append((float(q2), int(mult)))
    if out != sorted(out):
        raise FormatError("%s: spectrum rows out of order" % path)
    return out


def write_slice_csv(path, plane, axes, grid) -> None:
    """Slice grid: one CSV row per grid row, NaN cells outside the
    domain.  axes names the two varying Poincare coordinates in row
    (outer) then column (inner) order."""
    out = ["# %s %d" % (SLICE_KIND, SCHEMA_VERSION),
           "# plane %s" % plane,
           "# axes %s %s" % axes,
           "# resolution %d" % grid.shape[0]]
    for row in grid:
        out.append(",".join(fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def write_sphere_csv(path, rho, samples, circles) -> None:
    """Equal-area sphere samples plus matched-circle annotations.

    samples is (n, 3) rows of (phi, z, amplitude) in the cylindrical
    equal-area chart z = cos(theta); circles is a list of
    (label, alpha, (theta_f, phi_f), (theta_b, phi_b)).
    """
    out = ["# %s %d" % (SPHERE_KIND, SCHEMA_VERSION),
           "# rho %s" % fmt(rho),
           "phi,z,amplitude"]
    for phi, z, amp in samples:
        out.append("%s,%s,%s" % (fmt(phi), fmt(z), fmt(amp)))
    for label, alpha, fwd, back in circles:
        out.append("circle,%s,%s,%s,%s,%s,%s"
                   % (label, fmt(alpha), fmt(fwd[0]), fmt(fwd[1]),
                      fmt(back[0]), fmt(back[1])))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def write_report(path, which, payload: dict) -> None:
    body = json.dumps(payload, indent=1, sort_keys=True, default=_jsonify)
    with open(path, "w") as fh:
        fh.write("%s %d %s\n%s\n" % (REPORT_KIND, SCHEMA_VERSION, which, body))


def write_manifest(path, payload: dict) -> None:
    body = json.dumps(payload, indent=1, sort_keys=True, default=_jsonify)
    with open(path, "w") as fh:
        fh.write("%s %d\n%s\n" % (MANIFEST_KIND, SCHEMA_VERSION, body))


def read_headed_json(path, kind):
    with open(path) as fh:
        first = fh.readline()
        parts = first.split()
        if len(parts) < 2 or parts[0] != kind or parts[1] != str(SCHEMA_VERSION):
            raise FormatError("%s: bad %s header" % (path, kind))
        return json.loads(fh.read())


def _jsonify(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)
