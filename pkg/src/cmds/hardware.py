"""Accelerator description: PE array plus the multi-bank activation memory.

The activation memory is characterized by three widths (all in bits):
  bd_bits  one bank row, the smallest co-accessed unit
  pd_bits  the port, i.e. the widest single-cycle access (pd = port_banks * bd)
  md_bits  all banks jointly at one row index (md = bank_count * bd)
"""

import json
import math
from dataclasses import dataclass, field

from .workload import _is_pow2


class ConfigError(ValueError):
    """Raised for invalid accelerator configuration documents."""


@dataclass(frozen=True)
class MemoryGeometry:
    word_bits: int
    bd_bits: int
    pd_bits: int
    md_bits: int
    size_bytes: int

    def __post_init__(self):
        widths = (("word_bits", self.word_bits), ("bd_bits", self.bd_bits),
                  ("pd_bits", self.pd_bits), ("md_bits", self.md_bits))
        for name, val in widths:
            if not _is_pow2(val):
                raise ConfigError("%s must be a power of two, got %d" % (name, val))
        if self.bd_bits % self.word_bits:
            raise ConfigError("word_bits must divide bd_bits")
        if self.pd_bits < self.bd_bits:
            raise ConfigError("bd_bits (%d) exceeds pd_bits (%d)" % (self.bd_bits, self.pd_bits))
        if self.md_bits < self.pd_bits:
            raise ConfigError("pd_bits (%d) exceeds md_bits (%d)" % (self.pd_bits, self.md_bits))
        if self.size_bytes * 8 < self.md_bits:
            raise ConfigError("memory smaller than one row across all banks")

    @property
    def bd_words(self):
        return self.bd_bits // self.word_bits

    @property
    def pd_words(self):
        return self.pd_bits // self.word_bits

    @property
    def bank_count(self):
        return self.md_bits // self.bd_bits

    @property
    def port_banks(self):
        return self.pd_bits // self.bd_bits

    @property
    def rows_per_bank(self):
        return (self.size_bytes * 8) // self.md_bits


@dataclass(frozen=True)
class PEArray:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("PE array dimensions must be >= 1")
        if not _is_pow2(self.pe_count):
            raise ConfigError("pe_count must be a power of two, got %d" % self.pe_count)

    @property
    def pe_count(self):
        return self.rows * self.cols


@dataclass(frozen=True)
class EnergyModel:
    """Per-access energy costs in pJ. Defaults are synthetic placeholders and
    should be overridden with technology numbers when available."""
    activation_mem_access_pj: float = 16.0   # one full-port activation access
    weight_mem_access_pj: float = 1.0        # per weight word
    dram_access_pj: float = 100.0            # per word crossing the DRAM boundary
    mac_pj: float = 0.5
    reg_access_pj: float = 0.05              # per-word register read or write

    def __post_init__(self):
        for name in ("activation_mem_access_pj", "weight_mem_access_pj",
                     "dram_access_pj", "mac_pj", "reg_access_pj"):
            if getattr(self, name) < 0:
                raise ConfigError("%s must be >= 0" % name)


@dataclass(frozen=True)
class AcceleratorConfig:
    name: str
    pe: PEArray
    act_mem: MemoryGeometry
    energy: EnergyModel = field(default_factory=EnergyModel)


def parse_config(text):
    """Parse an accelerator configuration JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("syntax error in config document: %s" % exc) from exc
    try:
        pe = PEArray(rows=doc["pe"]["rows"], cols=doc["pe"]["cols"])
        mem = doc["act_mem"]
        geo = MemoryGeometry(word_bits=mem.get("word_bits", 8),
                             bd_bits=mem["bd_bits"], pd_bits=mem["pd_bits"],
                             md_bits=mem["md_bits"], size_bytes=mem["size_bytes"])
        energy = EnergyModel(**doc.get("energy", {}))
        return AcceleratorConfig(name=doc.get("name", "custom"), pe=pe,
                                 act_mem=geo, energy=energy)
    except KeyError as exc:
        raise ConfigError("config document missing field %s" % exc) from exc
    except TypeError as exc:
        raise ConfigError("config document malformed: %s" % exc) from exc


def serialize_config(cfg):
    doc = {
        "name": cfg.name,
        "pe": {"rows": cfg.pe.rows, "cols": cfg.pe.cols},
        "act_mem": {"word_bits": cfg.act_mem.word_bits, "bd_bits": cfg.act_mem.bd_bits,
                    "pd_bits": cfg.act_mem.pd_bits, "md_bits": cfg.act_mem.md_bits,
                    "size_bytes": cfg.act_mem.size_bytes},
        "energy": {"activation_mem_access_pj": cfg.energy.activation_mem_access_pj,
                   "weight_mem_access_pj": cfg.energy.weight_mem_access_pj,
                   "dram_access_pj": cfg.energy.dram_access_pj,
                   "mac_pj": cfg.energy.mac_pj,
                   "reg_access_pj": cfg.energy.reg_access_pj},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def load_config(path):
    with open(path, "r") as fh:
        return parse_config(fh.read())


def bank_access_patterns(bank_count, port_banks):
    """Number of distinct parallel bank selections when the port may pick any
    port_banks-subset of the banks."""
    return math.comb(bank_count, port_banks)


# Published multi-bank configurations plus the flexible small-BD variant.
# Per-access energies are synthetic (scaled with port width) and overridable.
PRESETS = {
    "isscc22": AcceleratorConfig(
        name="isscc22",
        pe=PEArray(rows=16, cols=16),
        act_mem=MemoryGeometry(word_bits=8, bd_bits=128, pd_bits=128,
                               md_bits=4096, size_bytes=256 * 1024),
        energy=EnergyModel(activation_mem_access_pj=16.0),
    ),
    "vlsi21": AcceleratorConfig(
        name="vlsi21",
        pe=PEArray(rows=64, cols=32),
        act_mem=MemoryGeometry(word_bits=8, bd_bits=128, pd_bits=1024,
                               md_bits=2048, size_bytes=1024 * 1024),
        energy=EnergyModel(activation_mem_access_pj=128.0),
    ),
    "proposed": AcceleratorConfig(
        name="proposed",
        pe=PEArray(rows=32, cols=32),
        act_mem=MemoryGeometry(word_bits=8, bd_bits=64, pd_bits=128,
                               md_bits=1024, size_bytes=512 * 1024),
        energy=EnergyModel(activation_mem_access_pj=16.0),
    ),
}


def resolve_config(name_or_path):
    """Look up a preset by name, else treat the argument as a config file path."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    return load_config(name_or_path)
