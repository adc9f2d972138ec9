"""Tenant network descriptions, the built-in network presets and bundles,
and the TOML workload document reader/writer.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import tomli
import tomli_w

from .errors import ChannelMismatchError, UnknownPresetError, WorkloadError

KINDS = ("conv", "pool", "fc")
PADDINGS = ("same", "valid")


@dataclass(frozen=True)
class LayerSpec:
    """One row of a network table.

    ``repeat`` is the "(n)" multiplicity: a conv row with repeat 3 stands for
    three stacked layers, the first mapping ``in_channels -> out_channels``
    and the rest ``out_channels -> out_channels``.
    For fc layers ``in_channels`` is the number of input features.
    """

    kind: str
    in_channels: int
    out_channels: int
    kernel: int = 1
    stride: int = 1
    repeat: int = 1
    padding: str = "same"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise WorkloadError(f"unknown layer kind {self.kind!r}", field="kind")
        for name in ("kernel", "stride", "repeat", "in_channels", "out_channels"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise WorkloadError(f"{name} must be a positive integer, got {value!r}", field=name)
        if self.padding not in PADDINGS:
            raise WorkloadError(f"padding must be one of {PADDINGS}", field="padding")
        if self.kind == "fc" and (self.kernel != 1 or self.stride != 1):
            raise WorkloadError("fc layers take kernel = 1 and stride = 1", field="kernel")
        if self.kind == "pool" and self.in_channels != self.out_channels:
            raise ChannelMismatchError("pool layers pass channels through", field="out")

    def expand(self) -> tuple[LayerSpec, ...]:
        if self.repeat == 1:
            return (self,)
        first = LayerSpec(self.kind, self.in_channels, self.out_channels,
                          self.kernel, self.stride, 1, self.padding)
        rest = LayerSpec(self.kind, self.out_channels, self.out_channels,
                         self.kernel, self.stride, 1, self.padding)
        return (first,) + (rest,) * (self.repeat - 1)


@dataclass(frozen=True)
class LayerShape:
    in_height: int
    in_width: int
    in_channels: int
    out_height: int
    out_width: int
    out_channels: int


def _out_extent(size: int, layer: LayerSpec) -> int:
    if layer.kind == "fc":
        return 1
    if layer.kind == "pool" or layer.padding == "same":
        return math.ceil(size / layer.stride)
    return (size - layer.kernel) // layer.stride + 1


@dataclass(frozen=True)
class TenantSpec:
    name: str
    input_height: int
    input_width: int
    input_channels: int
    layers: tuple[LayerSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        for attr in ("input_height", "input_width", "input_channels"):
            value = getattr(self, attr)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise WorkloadError(f"{attr} must be a positive integer, got {value!r}", field="input")
        if not self.layers:
            raise WorkloadError(f"tenant {self.name!r} has no layers", field="layers")
        self._propagate()

    @cached_property
    def flat_layers(self) -> tuple[LayerSpec, ...]:
        """Layers with every repeat expanded; all indices elsewhere refer to this list."""
        return tuple(x for layer in self.layers for x in layer.expand())

    @cached_property
    def shapes(self) -> tuple[LayerShape, ...]:
        return self._propagate()

    def _propagate(self) -> tuple[LayerShape, ...]:
        h, w, c = self.input_height, self.input_width, self.input_channels
        shapes = []
        for index, layer in self._indexed_flat():
            expected = c * h * w if layer.kind == "fc" else c
            if layer.in_channels != expected:
                what = "input features" if layer.kind == "fc" else "input channels"
                raise ChannelMismatchError(
                    f"tenant {self.name!r}: {layer.kind} layer expects {layer.in_channels} "
                    f"{what} but receives {expected}",
                    field=f"layers[{index}].in",
                )
            oh, ow = _out_extent(h, layer), _out_extent(w, layer)
            if oh < 1 or ow < 1:
                raise WorkloadError(
                    f"tenant {self.name!r}: feature map vanishes at layer {index}",
                    field=f"layers[{index}]",
                )
            shapes.append(LayerShape(h, w, c, oh, ow, layer.out_channels))
            h, w, c = oh, ow, layer.out_channels
        return tuple(shapes)

    def _indexed_flat(self) -> Iterable[tuple[int, LayerSpec]]:
        for index, layer in enumerate(self.layers):
            for x in layer.expand():
                yield index, x

    def count(self, kind: str) -> int:
        return sum(1 for layer in self.flat_layers if layer.kind == kind)


@dataclass(frozen=True)
class MultiTenantWorkload:
    tenants: tuple[TenantSpec, ...]
    name: str = "workload"

    def __post_init__(self) -> None:
        object.__setattr__(self, "tenants", tuple(self.tenants))
        if len(self.tenants) < 2:
            raise WorkloadError("a multi-tenant workload needs at least two tenants", field="tenant")
        seen = set()
        for i, tenant in enumerate(self.tenants):
            if tenant.name in seen:
                raise WorkloadError(f"duplicate tenant name {tenant.name!r}", field=f"tenant[{i}].name")
            seen.add(tenant.name)


# --------------------------------------------------------------------------
# presets

def _conv(k: int, out: int, n: int = 1) -> tuple[str, int, int, int]:
    return ("conv", k, out, n)


POOL = ("pool", 2, 0, 1)
_SMALL_HEAD = (("fc", 1, 512, 2), ("fc", 1, 100, 1))
_LARGE_HEAD = (("fc", 1, 4096, 2), ("fc", 1, 1000, 1))

# (kind, kernel, out_channels, repeat) rows, top to bottom.
_TABLE: dict[str, tuple[tuple[str, int, int, int], ...]] = {
    "DNN1": (_conv(3, 64), POOL, _conv(3, 128), POOL, _conv(3, 256, 2), POOL,
             _conv(3, 512, 2), POOL, _conv(3, 512, 2), POOL) + _SMALL_HEAD,
    "DNN2": (_conv(7, 96), POOL, _conv(3, 256), POOL, _conv(3, 512), POOL,
             _conv(3, 512), POOL) + _SMALL_HEAD,
    "DNN3": (_conv(7, 16), POOL, _conv(3, 48, 2), POOL, _conv(3, 64, 2), POOL) + _SMALL_HEAD,
    "DNN4": (_conv(7, 16), POOL, _conv(3, 48, 5), POOL, _conv(3, 64, 5), POOL,
             _conv(3, 64, 5), POOL) + _LARGE_HEAD,
    "VGG11": (_conv(3, 64), POOL, _conv(3, 128), POOL, _conv(3, 256, 2), POOL,
              _conv(3, 512, 2), POOL, _conv(3, 512, 2), POOL) + _LARGE_HEAD,
    "VGG13": (_conv(3, 64, 2), POOL, _conv(3, 128, 2), POOL, _conv(3, 256, 2), POOL,
              _conv(3, 512, 2), POOL, _conv(3, 512, 2), POOL) + _LARGE_HEAD,
    "VGG16": (_conv(3, 64, 2), POOL, _conv(3, 128, 2), POOL, _conv(3, 256, 3), POOL,
              _conv(3, 512, 2), _conv(3, 256), POOL,
              _conv(3, 512, 2), _conv(3, 256), POOL) + _LARGE_HEAD,
    "VGG19": (_conv(3, 64, 2), POOL, _conv(3, 128, 2), POOL, _conv(3, 256, 4), POOL,
              _conv(3, 512, 4), POOL, _conv(3, 512, 4), POOL) + _LARGE_HEAD,
}

PRESET_INPUTS: dict[str, tuple[int, int, int]] = {
    "DNN1": (32, 32, 3),
    "DNN2": (32, 32, 3),
    "DNN3": (32, 32, 3),
    "DNN4": (224, 224, 3),
    "VGG11": (224, 224, 3),
    "VGG13": (224, 224, 3),
    "VGG16": (224, 224, 3),
    "VGG19": (224, 224, 3),
}

PRESETS = tuple(_TABLE)

BUNDLES: dict[str, tuple[str, ...]] = {
    "MT1": ("DNN4", "VGG11", "VGG16"),
    "MT2": ("VGG13", "VGG16", "VGG19"),
    "MT3": ("VGG11", "VGG13", "VGG19"),
    "MT4": ("DNN1", "DNN2", "DNN3"),
    "MT5": ("DNN2", "DNN3", "DNN4"),
    "MT6": ("DNN1", "DNN3", "VGG16", "VGG19"),
    "MT7": ("VGG11", "VGG13", "VGG16", "VGG19"),
    "MT8": ("DNN1", "VGG11", "VGG13", "VGG16"),
}


def build_tenant(name: str, input_shape: Sequence[int], rows: Iterable[Mapping[str, Any]]) -> TenantSpec:
    """Build a tenant from loosely specified rows, inferring omitted ``in`` values.

    Pools default to kernel 2 / stride 2 and pass channels through; fc rows
    without ``in`` take the flattened size of the incoming feature map.
    Inferred values are written back, so the result is fully explicit.
    """
    h, w, c = (int(v) for v in input_shape)
    layers = []
    for index, row in enumerate(rows):
        kind = row.get("kind")
        if kind not in KINDS:
            raise WorkloadError(f"unknown layer kind {kind!r}", field=f"layers[{index}].kind")
        default_k = 2 if kind == "pool" else (1 if kind == "fc" else None)
        kernel = row.get("kernel", default_k)
        if kernel is None:
            raise WorkloadError("conv layers need a kernel", field=f"layers[{index}].kernel")
        stride = row.get("stride", 2 if kind == "pool" else 1)
        inferred = c * h * w if kind == "fc" else c
        in_ch = row.get("in", inferred)
        out_ch = row.get("out", in_ch if kind == "pool" else None)
        if out_ch is None:
            raise WorkloadError(f"{kind} layers need an out size", field=f"layers[{index}].out")
        try:
            layer = LayerSpec(kind, in_ch, out_ch, kernel, stride,
                              row.get("repeat", 1), row.get("padding", "same"))
        except WorkloadError as exc:
            raise type(exc)(exc.message, field=f"layers[{index}].{_DOC_KEY.get(exc.field, exc.field)}") from None
        if in_ch != inferred:
            what = "input features" if kind == "fc" else "input channels"
            raise ChannelMismatchError(
                f"tenant {name!r}: {kind} layer declares in = {in_ch} but receives {inferred} {what}",
                field=f"layers[{index}].in",
            )
        layers.append(layer)
        for x in layer.expand():
            h, w, c = _out_extent(h, x), _out_extent(w, x), x.out_channels
            if h < 1 or w < 1:
                raise WorkloadError(f"tenant {name!r}: feature map vanishes", field=f"layers[{index}]")
    return TenantSpec(name, int(input_shape[0]), int(input_shape[1]), int(input_shape[2]), tuple(layers))


_DOC_KEY = {"in_channels": "in", "out_channels": "out"}


def load_preset(name: str, input_shape: Sequence[int] | None = None, tenant_name: str | None = None) -> TenantSpec:
    """Return one of the eight table networks with repeats expanded."""
    if name not in _TABLE:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}", field="preset")
    shape = tuple(input_shape) if input_shape is not None else PRESET_INPUTS[name]
    rows = []
    for kind, kernel, out, repeat in _TABLE[name]:
        row: dict[str, Any] = {"kind": kind, "kernel": kernel}
        if kind != "pool":
            row["out"] = out
        rows.extend([row] * repeat)
    return build_tenant(tenant_name or name, shape, rows)


def load_bundle(name: str) -> MultiTenantWorkload:
    if name not in BUNDLES:
        raise UnknownPresetError(f"unknown bundle {name!r}; choose from {', '.join(BUNDLES)}", field="bundle")
    return MultiTenantWorkload(tuple(load_preset(p) for p in BUNDLES[name]), name=name)


# --------------------------------------------------------------------------
# document format

@dataclass(frozen=True)
class WorkloadDocument:
    """A parsed workload file: the tenants plus the raw optional sections."""

    workload: MultiTenantWorkload
    chip: Mapping[str, Any] | None = None
    optimizer: Mapping[str, Any] = field(default_factory=dict)


def _locator(text: str):
    lines = text.splitlines()
    headers = [i + 1 for i, line in enumerate(lines) if re.match(r"\s*\[\[\s*tenant\s*\]\]", line)]

    def locate(tenant: int, layer: int | None = None) -> int | None:
        if tenant >= len(headers):
            return None
        start = headers[tenant]
        if layer is None:
            return start
        end = headers[tenant + 1] if tenant + 1 < len(headers) else len(lines) + 1
        hits = [n for n in range(start, end) if re.search(r"\bkind\s*=", lines[n - 1])]
        return hits[layer] if layer < len(hits) else start

    return locate


def parse_document(text: str) -> WorkloadDocument:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise WorkloadError(f"syntax error: {exc}") from None
    locate = _locator(text)
    entries = data.get("tenant")
    if not isinstance(entries, list) or not entries:
        raise WorkloadError("no [[tenant]] entries", field="tenant")
    tenants = []
    for i, entry in enumerate(entries):
        tenants.append(_parse_tenant(i, entry, locate))
    try:
        workload = MultiTenantWorkload(tuple(tenants), name=str(data.get("name", "workload")))
    except WorkloadError as exc:
        raise WorkloadError(exc.message, field=exc.field, line=_field_line(exc.field, locate)) from None
    chip = data.get("chip")
    if chip is not None and not isinstance(chip, dict):
        raise WorkloadError("[chip] must be a table", field="chip")
    optimizer = data.get("optimizer", {})
    if not isinstance(optimizer, dict):
        raise WorkloadError("[optimizer] must be a table", field="optimizer")
    return WorkloadDocument(workload, chip, optimizer)


def _field_line(path: str | None, locate) -> int | None:
    m = re.match(r"tenant\[(\d+)\]", path or "")
    return locate(int(m.group(1))) if m else None


def _parse_tenant(i: int, entry: Any, locate) -> TenantSpec:
    prefix = f"tenant[{i}]"
    if not isinstance(entry, dict):
        raise WorkloadError("tenant entry must be a table", field=prefix, line=locate(i))
    preset, layers = entry.get("preset"), entry.get("layers")
    if (preset is None) == (layers is None):
        raise WorkloadError("give exactly one of preset or layers", field=prefix, line=locate(i))
    shape = entry.get("input")
    if shape is not None:
        if not isinstance(shape, list) or len(shape) != 3 or not all(
                isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in shape):
            raise WorkloadError("input must be [H, W, C] of positive integers",
                                field=f"{prefix}.input", line=locate(i))
    name = entry.get("name", preset)
    try:
        if preset is not None:
            return load_preset(str(preset), shape, name)
        if name is None:
            raise WorkloadError("inline tenants need a name", field="name")
        if shape is None:
            raise WorkloadError("inline tenants need input = [H, W, C]", field="input")
        if not isinstance(layers, list) or not all(isinstance(r, dict) for r in layers):
            raise WorkloadError("layers must be a list of tables", field="layers")
        return build_tenant(str(name), shape, layers)
    except WorkloadError as exc:
        m = re.match(r"layers\[(\d+)\]", exc.field or "")
        line = locate(i, int(m.group(1))) if m else locate(i)
        raise type(exc)(exc.message, field=f"{prefix}.{exc.field}" if exc.field else prefix, line=line) from None


def parse_workload(text: str) -> MultiTenantWorkload:
    return parse_document(text).workload


def layer_record(layer: LayerSpec) -> dict[str, Any]:
    record: dict[str, Any] = {
        "kind": layer.kind,
        "kernel": layer.kernel,
        "in": layer.in_channels,
        "out": layer.out_channels,
        "stride": layer.stride,
        "repeat": layer.repeat,
    }
    if layer.padding != "same":
        record["padding"] = layer.padding
    return record


def dump_workload(workload: MultiTenantWorkload, chip: Mapping[str, Any] | None = None,
                  optimizer: Mapping[str, Any] | None = None) -> str:
    """Serialize to the document format with every tenant written inline."""
    doc: dict[str, Any] = {"name": workload.name}
    if chip:
        doc["chip"] = dict(chip)
    if optimizer:
        doc["optimizer"] = dict(optimizer)
    doc["tenant"] = [
        {
            "name": t.name,
            "input": [t.input_height, t.input_width, t.input_channels],
            "layers": [layer_record(layer) for layer in t.layers],
        }
        for t in workload.tenants
    ]
    return tomli_w.dumps(doc)
