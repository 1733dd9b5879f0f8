"""File formats and configuration: binary tensor files, posterior-draw files
with a text manifest header, and sectioned key=value run configs.

Tensor file layout (all integers and floats little-endian):

    bytes 0-3    magic ``BTRT``
    bytes 4-5    format version (u16)
    bytes 6-7    tensor order D (u16)
    next 8*D     dims (u64 each)
    payload      prod(dims) float64 values, first index fastest

A draws file is a text header of ``key=value`` lines framed by ``BTRTDRAWS``
and ``END`` lines, followed by one fixed-width binary record per retained
draw; the ``blocks`` header line declares the record layout.  Writes go
through a temp file and an atomic rename.
"""

from __future__ import annotations

import configparser
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .model import Dataset, Hyperparams, PosteriorDraws, RunManifest

__all__ = [
    "TensorFileError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedPayloadError",
    "ConfigError",
    "read_tensor",
    "write_tensor",
    "write_draws",
    "read_draws",
    "RunConfig",
    "load_dataset",
    "read_column",
    "write_column",
    "read_csv_matrix",
    "write_csv_matrix",
    "atomic_write_bytes",
    "atomic_write_text",
]

MAGIC = b"BTRT"
TENSOR_VERSION = 1
DRAWS_MAGIC = "BTRTDRAWS"
DRAWS_VERSION = 1


class TensorFileError(ValueError):
    code = "tensor-file"


class BadMagicError(TensorFileError):
    code = "bad-magic"


class VersionMismatchError(TensorFileError):
    code = "version-mismatch"


class TruncatedPayloadError(TensorFileError):
    code = "truncated-payload"


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------
# atomic writes


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ----------------------------------------------------------------------
# tensor files


def write_tensor(tensor, path) -> None:
    """Write a tensor; ``read_tensor(write_tensor(t)) == t`` bit for bit."""
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim < 1:
        raise ValueError("tensor must have order >= 1")
    header = MAGIC + struct.pack("<HH", TENSOR_VERSION, tensor.ndim)
    header += struct.pack(f"<{tensor.ndim}Q", *tensor.shape)
    payload = tensor.reshape(-1, order="F").astype("<f8").tobytes()
    atomic_write_bytes(path, header + payload)


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise TruncatedPayloadError(f"{path}: file shorter than the magic header")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 8:
        raise TruncatedPayloadError(f"{path}: truncated fixed header")
    version, order = struct.unpack("<HH", raw[4:8])
    if version != TENSOR_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, this build reads {TENSOR_VERSION}"
        )
    if order < 1:
        raise TensorFileError(f"{path}: invalid tensor order {order}")
    dims_end = 8 + 8 * order
    if len(raw) < dims_end:
        raise TruncatedPayloadError(f"{path}: truncated dims block")
    dims = struct.unpack(f"<{order}Q", raw[8:dims_end])
    if any(d < 1 for d in dims):
        raise TensorFileError(f"{path}: invalid dims {dims}")
    count = 1
    for d in dims:
        count *= d
    expected = dims_end + 8 * count
    if len(raw) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(raw) - dims_end} bytes, expected {8 * count}"
        )
    values = np.frombuffer(raw, dtype="<f8", offset=dims_end)
    return values.reshape(dims, order="F").copy()


# ----------------------------------------------------------------------
# plain-text vectors and matrices


def write_column(values, path) -> None:
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    atomic_write_text(path, "".join(repr(float(v)) + "\n" for v in values))


def read_column(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        return np.array([float(ln) for ln in lines], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"{path}: expected one number per line ({exc})") from exc


def write_csv_matrix(matrix, path, header: list | None = None) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in np.atleast_2d(matrix):
        lines.append(",".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv_matrix(path, skip_header: bool = False) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if skip_header and lines:
        lines = lines[1:]
    if not lines:
        return np.zeros((0, 0))
    try:
        rows = [[float(v) for v in ln.split(",")] for ln in lines]
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed numeric row ({exc})") from exc
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


# ----------------------------------------------------------------------
# draws files


def _stack_to_records(stack: np.ndarray) -> np.ndarray:
    """(S, p_0, ..., p_{D-1}) -> (S, prod(p)) with per-record F-order."""
    s = stack.shape[0]
    rev = (0,) + tuple(range(stack.ndim - 1, 0, -1))
    return np.ascontiguousarray(stack.transpose(rev)).reshape(s, -1)


def _records_to_stack(records: np.ndarray, dims) -> np.ndarray:
    s = records.shape[0]
    rev = (0,) + tuple(range(len(dims), 0, -1))
    return np.ascontiguousarray(
        records.reshape((s,) + tuple(dims)[::-1]).transpose(rev)
    )


def _fmt_floats(values) -> str:
    return ",".join(repr(float(v)) for v in np.asarray(values).reshape(-1))


def write_draws(draws: PosteriorDraws, path) -> None:
    m = draws.manifest
    blocks = [
        ("coef", int(np.prod(m.dims))),
        ("gamma", m.q),
        ("sigma2", 1),
        ("loglik", 1),
        ("tau", 1),
        ("z", 1),
    ]
    payload_cols = [
        _stack_to_records(draws.coef),
        draws.gamma.reshape(m.retained, -1),
        draws.sigma2[:, None],
        draws.loglik[:, None],
        draws.tau[:, None],
        draws.z[:, None],
    ]
    if m.store_factors:
        if draws.factors is None:
            raise ValueError("manifest says factors are stored but none are present")
        for j, f in enumerate(draws.factors):
            blocks.append((f"factor{j}", f.shape[1] * f.shape[2]))
            payload_cols.append(_stack_to_records(f))
    h = m.hyper
    lines = [
        f"{DRAWS_MAGIC} {DRAWS_VERSION}",
        f"seed={m.seed}",
        f"stream={m.stream}",
        f"dims={','.join(str(d) for d in m.dims)}",
        f"ranks={','.join(str(r) for r in m.ranks)}",
        f"q={m.q}",
        f"n={m.n}",
        f"iterations={m.iterations}",
        f"burn_in={m.burn_in}",
        f"thin={m.thin}",
        f"retained={m.retained}",
        f"center_scale={int(m.center_scale)}",
        f"y_mean={repr(float(m.y_mean))}",
        f"y_scale={repr(float(m.y_scale))}",
        f"store_factors={int(m.store_factors)}",
    ]
    for key, value in h.scalar_dict().items():
        lines.append(f"{key}={repr(float(value))}")
    lines.append(f"mu_gamma={_fmt_floats(h.mu_gamma)}")
    lines.append(f"sigma_gamma={_fmt_floats(h.sigma_gamma)}")
    lines.append("blocks=" + ",".join(f"{name}:{width}" for name, width in blocks))
    lines.append("END")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    body = np.concatenate(payload_cols, axis=1).astype("<f8").tobytes()
    atomic_write_bytes(path, header + body)


def read_draws(path) -> PosteriorDraws:
    raw = Path(path).read_bytes()
    end_marker = b"\nEND\n"
    split = raw.find(end_marker)
    if split < 0:
        raise TensorFileError(f"{path}: draws header has no END line")
    header_lines = raw[:split].decode("utf-8").splitlines()
    body = raw[split + len(end_marker):]
    if not header_lines or not header_lines[0].startswith(DRAWS_MAGIC):
        raise BadMagicError(f"{path}: not a draws file")
    version = int(header_lines[0].split()[1])
    if version != DRAWS_VERSION:
        raise VersionMismatchError(
            f"{path}: draws version {version}, this build reads {DRAWS_VERSION}"
        )
    fields = {}
    for line in header_lines[1:]:
        key, _, value = line.partition("=")
        if not _:
            raise TensorFileError(f"{path}: malformed header line {line!r}")
        fields[key] = value
    try:
        dims = tuple(int(v) for v in fields["dims"].split(","))
        ranks = tuple(int(v) for v in fields["ranks"].split(","))
        q = int(fields["q"])
        retained = int(fields["retained"])
        mu_gamma = (
            np.array([float(v) for v in fields["mu_gamma"].split(",")])
            if q else np.zeros(0)
        )
        sigma_gamma = (
            np.array([float(v) for v in fields["sigma_gamma"].split(",")]).reshape(q, q)
            if q else np.zeros((0, 0))
        )
        hyper = Hyperparams(
            a_sigma=float(fields["a_sigma"]), b_sigma=float(fields["b_sigma"]),
            a_lambda=float(fields["a_lambda"]), b_lambda=float(fields["b_lambda"]),
            a_tau=float(fields["a_tau"]), b_tau=float(fields["b_tau"]),
            a_z=float(fields["a_z"]), b_z=float(fields["b_z"]),
            a_phi=float(fields["a_phi"]), b_phi=float(fields["b_phi"]),
            mu_gamma=mu_gamma, sigma_gamma=sigma_gamma,
        )
        manifest = RunManifest(
            seed=int(fields["seed"]), stream=int(fields["stream"]), dims=dims,
            ranks=ranks, q=q, n=int(fields["n"]),
            iterations=int(fields["iterations"]), burn_in=int(fields["burn_in"]),
            thin=int(fields["thin"]), retained=retained,
            center_scale=bool(int(fields["center_scale"])),
            y_mean=float(fields["y_mean"]), y_scale=float(fields["y_scale"]),
            hyper=hyper, store_factors=bool(int(fields["store_factors"])),
        )
        blocks = []
        for item in fields["blocks"].split(","):
            name, _, width = item.partition(":")
            blocks.append((name, int(width)))
    except (KeyError, ValueError) as exc:
        raise TensorFileError(f"{path}: bad draws header ({exc})") from exc
    record_len = sum(w for _, w in blocks)
    expected = 8 * record_len * retained
    if len(body) != expected:
        raise TruncatedPayloadError(
            f"{path}: draws body is {len(body)} bytes, expected {expected}"
        )
    table = np.frombuffer(body, dtype="<f8").reshape(retained, record_len)
    cols = {}
    offset = 0
    for name, width in blocks:
        cols[name] = table[:, offset:offset + width]
        offset += width
    factors = None
    if manifest.store_factors:
        factors = []
        for j, (p, r) in enumerate(zip(dims, ranks)):
            rec = cols[f"factor{j}"]
            factors.append(_records_to_stack(rec, (p, r)))
    return PosteriorDraws(
        manifest=manifest,
        coef=_records_to_stack(cols["coef"], dims),
        gamma=np.ascontiguousarray(cols["gamma"]),
        sigma2=np.ascontiguousarray(cols["sigma2"][:, 0]),
        loglik=np.ascontiguousarray(cols["loglik"][:, 0]),
        tau=np.ascontiguousarray(cols["tau"][:, 0]),
        z=np.ascontiguousarray(cols["z"][:, 0]),
        factors=factors,
    )


# ----------------------------------------------------------------------
# run configuration


_SECTION_KEYS = {
    "data": {"tensor", "response", "covariates", "truth", "draws", "predictions"},
    "model": {
        "ranks", "iterations", "burn_in", "thin", "seed",
        "center_scale_response", "auto_raise_rank1", "store_factors",
        "max_rank", "predict_level",
    },
    "hyper": {
        "a_sigma", "b_sigma", "a_lambda", "b_lambda", "a_tau", "b_tau",
        "a_z", "b_z", "a_phi", "b_phi", "mu_gamma", "sigma_gamma",
    },
    "selection": {"s2means_b", "fdr_q"},
    "simulate": {
        "dims", "regions", "radius_min", "radius_max", "peak",
        "boundary_value", "n", "gamma_true", "noise_variance", "seed",
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class RunConfig:
    """Sectioned key=value configuration with a fixed schema.

    Unknown sections or keys raise :class:`ConfigError` so typos fail loudly
    instead of silently falling back to defaults.
    """

    def __init__(self, values: dict | None = None, base_dir: Path | None = None):
        self.values = values or {}
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        values: dict = {}
        for section in parser.sections():
            if section not in _SECTION_KEYS:
                raise ConfigError(f"{path}: unknown section [{section}]")
            allowed = _SECTION_KEYS[section]
            for key, value in parser.items(section):
                if key not in allowed:
                    raise ConfigError(
                        f"{path}: unknown key {key!r} in section [{section}]"
                    )
                values[f"{section}.{key}"] = value.strip()
        return cls(values, base_dir=path.parent)

    # -- typed getters --------------------------------------------------

    def has(self, dotted: str) -> bool:
        return dotted in self.values

    def get_str(self, dotted: str, default=None):
        return self.values.get(dotted, default)

    def get_int(self, dotted: str, default=None):
        if dotted not in self.values:
            return default
        try:
            return int(self.values[dotted])
        except ValueError as exc:
            raise ConfigError(f"{dotted}: expected an integer") from exc

    def get_float(self, dotted: str, default=None):
        if dotted not in self.values:
            return default
        try:
            return float(self.values[dotted])
        except ValueError as exc:
            raise ConfigError(f"{dotted}: expected a number") from exc

    def get_bool(self, dotted: str, default=None):
        if dotted not in self.values:
            return default
        raw = self.values[dotted].lower()
        if raw in _TRUE:
            return True
        if raw in _FALSE:
            return False
        raise ConfigError(f"{dotted}: expected a boolean, got {raw!r}")

    def get_int_list(self, dotted: str, default=None):
        if dotted not in self.values:
            return default
        try:
            return tuple(int(v) for v in self.values[dotted].split(","))
        except ValueError as exc:
            raise ConfigError(f"{dotted}: expected comma-separated integers") from exc

    def get_float_list(self, dotted: str, default=None):
        if dotted not in self.values:
            return default
        try:
            return tuple(float(v) for v in self.values[dotted].split(","))
        except ValueError as exc:
            raise ConfigError(f"{dotted}: expected comma-separated numbers") from exc

    def get_path(self, dotted: str, default=None, data_dir=None):
        raw = self.values.get(dotted)
        if raw is None:
            return default
        p = Path(raw)
        if p.is_absolute():
            return p
        root = Path(data_dir) if data_dir is not None else self.base_dir
        return root / p

    def set(self, dotted: str, value) -> None:
        self.values[dotted] = str(value)

    def dump(self) -> str:
        sections: dict = {}
        for dotted, value in self.values.items():
            section, _, key = dotted.partition(".")
            sections.setdefault(section, []).append((key, value))
        out = []
        for section in ("data", "model", "hyper", "selection", "simulate"):
            if section not in sections:
                continue
            out.append(f"[{section}]")
            for key, value in sections[section]:
                out.append(f"{key} = {value}")
            out.append("")
        return "\n".join(out)

    def hyper_overrides(self) -> dict:
        out = {}
        for key in ("a_sigma", "b_sigma", "a_lambda", "b_lambda", "a_tau",
                    "b_tau", "a_z", "b_z", "a_phi", "b_phi"):
            value = self.get_float(f"hyper.{key}")
            if value is not None:
                out[key] = value
        mu = self.get_float_list("hyper.mu_gamma")
        if mu is not None:
            out["mu_gamma"] = np.array(mu)
        sg = self.get_float_list("hyper.sigma_gamma")
        if sg is not None:
            out["sigma_gamma"] = np.array(sg[0] if len(sg) == 1 else sg)
        return out


def load_dataset(config: RunConfig, data_dir=None) -> Dataset:
    """Assemble a dataset from the files named in a config's [data] section.

    The tensor file stores subjects along its trailing dimension; response
    and covariate row counts must agree with it, and mismatches name the
    offending file.
    """
    tensor_path = config.get_path("data.tensor", data_dir=data_dir)
    response_path = config.get_path("data.response", data_dir=data_dir)
    if data_dir is not None:
        root = Path(data_dir)
        if tensor_path is None:
            tensor_path = root / "x.tensor"
        if response_path is None:
            response_path = root / "y.txt"
    if tensor_path is None or response_path is None:
        raise ConfigError(
            "missing [data] tensor/response entries (or a --data directory)"
        )
    stacked = read_tensor(tensor_path)
    if stacked.ndim < 2:
        raise ConfigError(f"{tensor_path}: covariate tensor must include a subject dim")
    n = stacked.shape[-1]
    X = np.ascontiguousarray(np.moveaxis(stacked, -1, 0))
    y = read_column(response_path)
    if y.shape[0] != n:
        raise ConfigError(
            f"{response_path}: {y.shape[0]} responses but {tensor_path} has "
            f"{n} subjects"
        )
    cov_path = config.get_path("data.covariates", data_dir=data_dir)
    if cov_path is None and data_dir is not None:
        candidate = Path(data_dir) / "covariates.csv"
        if candidate.exists():
            cov_path = candidate
    if cov_path is not None:
        eta = read_csv_matrix(cov_path)
        if eta.shape[0] != n:
            raise ConfigError(
                f"{cov_path}: {eta.shape[0]} covariate rows but {tensor_path} "
                f"has {n} subjects"
            )
    else:
        eta = np.zeros((n, 0))
    return Dataset(X=X, y=y, eta=eta)
