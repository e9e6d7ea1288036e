"""File formats: JSON codebooks, experiment configs, binary checkpoints, CSV.

Codebooks and configs are structured text so they stay auditable; model
checkpoints are binary (magic number + JSON header + raw float64 arrays).
Complex values are serialized as [re, im] pairs of full-precision decimal
strings, which round-trip bit-exactly through repr/float.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    Codebook,
    ConfigError,
    IndicatorMatrix,
    ScmaError,
    SystemConfig,
    build_indicator,
)
from .encoder import GeneratorSet
from .nn import DenseLayer, MultiTaskDecoder
from .training import TrainConfig

CODEBOOK_FORMAT = "scmalink-codebook"
CODEBOOK_VERSION = 1
CHECKPOINT_MAGIC = b"SCMALNK\x01"
CHECKPOINT_VERSION = 1


class CodebookFormatError(ScmaError):
    """Malformed codebook or config file."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _content_hash(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def codebook_to_dict(codebook: Codebook, name: str = "", seed=None) -> dict:
    cfg = codebook.config
    codewords = [
        [
            [[_fmt(codebook.entries[j][k, m].real), _fmt(codebook.entries[j][k, m].imag)]
             for k in range(cfg.K)]
            for m in range(cfg.M)
        ]
        for j in range(cfg.J)
    ]
    body = {
        "system": {"users": cfg.J, "resources": cfg.K, "nonzero": cfg.N, "alphabet": cfg.M},
        "F": codebook.indicator.F.tolist(),
        "codewords": codewords,
    }
    return {
        "format": CODEBOOK_FORMAT,
        "version": CODEBOOK_VERSION,
        "name": name,
        "seed": seed,
        "config_hash": _content_hash(body),
        **body,
    }


def write_codebook(path, codebook: Codebook, name: str = "", seed=None) -> None:
    Path(path).write_text(json.dumps(codebook_to_dict(codebook, name, seed), indent=1) + "\n")


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise CodebookFormatError(f"{where}: missing field {key!r}")
    return doc[key]


def codebook_from_dict(doc: dict, where: str = "codebook") -> Codebook:
    if _require(doc, "format", where) != CODEBOOK_FORMAT:
        raise CodebookFormatError(f"{where}: format {doc.get('format')!r} is not {CODEBOOK_FORMAT!r}")
    if _require(doc, "version", where) != CODEBOOK_VERSION:
        raise CodebookFormatError(f"{where}: unsupported version {doc.get('version')!r}")
    sysblock = _require(doc, "system", where)
    try:
        cfg = SystemConfig(
            n_users=int(sysblock["users"]),
            n_resources=int(sysblock["resources"]),
            n_nonzero=int(sysblock["nonzero"]),
            alphabet_size=int(sysblock["alphabet"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CodebookFormatError(f"{where}: bad system block: {exc}") from exc
    ind = build_indicator(np.array(_require(doc, "F", where)))
    raw = _require(doc, "codewords", where)
    if len(raw) != cfg.J:
        raise CodebookFormatError(f"{where}: {len(raw)} users listed, system says {cfg.J}")
    entries = np.zeros((cfg.J, cfg.K, cfg.M), dtype=complex)
    for j, user in enumerate(raw):
        if len(user) != cfg.M:
            raise CodebookFormatError(f"{where}: user {j} has {len(user)} codewords, expected {cfg.M}")
        for m, cw in enumerate(user):
            if len(cw) != cfg.K:
                raise CodebookFormatError(
                    f"{where}: user {j} codeword {m} has {len(cw)} entries, expected {cfg.K}"
                )
            for k, pair in enumerate(cw):
                try:
                    entries[j, k, m] = float(pair[0]) + 1j * float(pair[1])
                except (TypeError, ValueError, IndexError) as exc:
                    raise CodebookFormatError(
                        f"{where}: user {j} codeword {m} resource {k}: bad [re, im] pair {pair!r}"
                    ) from exc
    # support violations surface as ConfigError naming (user, resource)
    return Codebook(entries=entries, config=cfg, indicator=ind)


def read_codebook(path) -> Codebook:
    p = Path(path)
    if not p.exists():
        raise CodebookFormatError(f"{p}: no such file")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CodebookFormatError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return codebook_from_dict(doc, where=str(p))


@dataclass(frozen=True)
class EvalConfig:
    snr_db: tuple = (4.0, 6.0, 8.0, 10.0, 12.0)
    min_errors: int = 200
    max_bits: int = 100_000_000
    detectors: tuple = ("mpa",)
    mpa_iterations: int = 10


@dataclass(frozen=True)
class PathsConfig:
    init_codebook: str | None = None
    output_dir: str = "."


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    indicator: IndicatorMatrix
    train: TrainConfig
    eval: EvalConfig = EvalConfig()
    paths: PathsConfig = PathsConfig()

    def config_hash(self) -> str:
        return _content_hash(
            {
                "system": [self.system.J, self.system.K, self.system.N, self.system.M],
                "F": self.indicator.F.tolist(),
                "train": [
                    self.train.alpha0, self.train.beta, self.train.decay_step,
                    self.train.batch_size, self.train.n_iterations,
                    self.train.ebn0_min_db, self.train.ebn0_max_db, self.train.seed,
                ],
            }
        )


def _check_keys(block: dict, allowed, where: str):
    unknown = set(block) - set(allowed)
    if unknown:
        raise CodebookFormatError(f"{where}: unknown keys {sorted(unknown)}")


def experiment_config_from_dict(doc: dict, where: str = "config") -> ExperimentConfig:
    _check_keys(doc, {"system", "train", "eval", "paths"}, where)
    sysblock = _require(doc, "system", where)
    _check_keys(sysblock, {"users", "resources", "nonzero", "alphabet", "F"}, f"{where}.system")
    cfg = SystemConfig(
        n_users=int(sysblock["users"]),
        n_resources=int(sysblock["resources"]),
        n_nonzero=int(sysblock["nonzero"]),
        alphabet_size=int(sysblock["alphabet"]),
    )
    ind = build_indicator(np.array(_require(sysblock, "F", f"{where}.system")))
    if ind.n_users != cfg.J or ind.n_resources != cfg.K or ind.n_nonzero != cfg.N:
        raise CodebookFormatError(f"{where}.system: F matrix does not match the stated dimensions")

    tr = _require(doc, "train", where)
    allowed = {
        "alpha0", "beta", "decay_step", "batch_size", "iterations",
        "ebn0_min_db", "ebn0_max_db", "seed", "floor_decay",
    }
    _check_keys(tr, allowed, f"{where}.train")
    defaults = TrainConfig()
    train = TrainConfig(
        alpha0=float(tr.get("alpha0", defaults.alpha0)),
        beta=float(tr.get("beta", defaults.beta)),
        decay_step=int(tr.get("decay_step", defaults.decay_step)),
        batch_size=int(tr.get("batch_size", defaults.batch_size)),
        n_iterations=int(tr.get("iterations", defaults.n_iterations)),
        ebn0_min_db=float(tr.get("ebn0_min_db", defaults.ebn0_min_db)),
        ebn0_max_db=float(tr.get("ebn0_max_db", defaults.ebn0_max_db)),
        seed=int(tr.get("seed", defaults.seed)),
        floor_decay=bool(tr.get("floor_decay", defaults.floor_decay)),
    )

    ev = doc.get("eval", {})
    _check_keys(ev, {"snr_db", "min_errors", "max_bits", "detectors", "mpa_iterations"}, f"{where}.eval")
    ev_defaults = EvalConfig()
    evalcfg = EvalConfig(
        snr_db=tuple(float(x) for x in ev.get("snr_db", ev_defaults.snr_db)),
        min_errors=int(ev.get("min_errors", ev_defaults.min_errors)),
        max_bits=int(ev.get("max_bits", ev_defaults.max_bits)),
        detectors=tuple(ev.get("detectors", ev_defaults.detectors)),
        mpa_iterations=int(ev.get("mpa_iterations", ev_defaults.mpa_iterations)),
    )

    pa = doc.get("paths", {})
    _check_keys(pa, {"init_codebook", "output_dir"}, f"{where}.paths")
    paths = PathsConfig(
        init_codebook=pa.get("init_codebook"),
        output_dir=pa.get("output_dir", "."),
    )
    return ExperimentConfig(system=cfg, indicator=ind, train=train, eval=evalcfg, paths=paths)


def read_experiment_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise CodebookFormatError(f"{p}: no such file")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CodebookFormatError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return experiment_config_from_dict(doc, where=str(p))


def save_checkpoint(path, gen: GeneratorSet, decoder: MultiTaskDecoder,
                    indicator: IndicatorMatrix, meta: dict | None = None) -> None:
    """Binary dump of all parameters plus enough topology to rebuild them."""
    arrays = [("gbar", gen.gbar)]
    layout = {"shared": [], "subnets": []}
    for i, layer in enumerate(decoder.shared):
        arrays += [(f"shared.{i}.w", layer.weights), (f"shared.{i}.b", layer.bias)]
        layout["shared"].append(layer.activation)
    for j, net in enumerate(decoder.subnets):
        acts = []
        for i, layer in enumerate(net):
            arrays += [(f"subnet.{j}.{i}.w", layer.weights), (f"subnet.{j}.{i}.b", layer.bias)]
            acts.append(layer.activation)
        layout["subnets"].append(acts)
    cfg = gen.config
    header = {
        "version": CHECKPOINT_VERSION,
        "system": {"users": cfg.J, "resources": cfg.K, "nonzero": cfg.N, "alphabet": cfg.M},
        "F": indicator.F.tolist(),
        "layout": layout,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "meta": meta or {},
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (GeneratorSet, MultiTaskDecoder, IndicatorMatrix, meta)."""
    p = Path(path)
    with open(p, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CodebookFormatError(f"{p}: not a checkpoint file (bad magic)")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise CodebookFormatError(f"{p}: unsupported checkpoint version {header.get('version')!r}")
        values = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise CodebookFormatError(f"{p}: truncated array {spec['name']!r}")
            values[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    sysblock = header["system"]
    cfg = SystemConfig(
        n_users=sysblock["users"],
        n_resources=sysblock["resources"],
        n_nonzero=sysblock["nonzero"],
        alphabet_size=sysblock["alphabet"],
    )
    ind = build_indicator(np.array(header["F"]))
    gen = GeneratorSet(gbar=values["gbar"], config=cfg)
    shared = [
        DenseLayer(values[f"shared.{i}.w"], values[f"shared.{i}.b"], act)
        for i, act in enumerate(header["layout"]["shared"])
    ]
    subnets = [
        [
            DenseLayer(values[f"subnet.{j}.{i}.w"], values[f"subnet.{j}.{i}.b"], act)
            for i, act in enumerate(acts)
        ]
        for j, acts in enumerate(header["layout"]["subnets"])
    ]
    return gen, MultiTaskDecoder(shared, subnets), ind, header["meta"]


BER_CSV_HEADER = "ebn0_db,bits,bit_errors,ber,ci_low,ci_high,detector,codebook_id"


def ber_curve_to_csv(curve, path) -> None:
    lines = [BER_CSV_HEADER]
    for pt in curve.points:
        lines.append(
            f"{_fmt(pt.ebn0_db)},{pt.bits},{pt.bit_errors},{_fmt(pt.ber)},"
            f"{_fmt(pt.ci_low)},{_fmt(pt.ci_high)},{pt.detector},{pt.codebook_id}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def med_table_to_csv(rows, path) -> None:
    lines = ["name,med"] + [f"{name},{_fmt(med)}" for name, med in rows]
    Path(path).write_text("\n".join(lines) + "\n")
