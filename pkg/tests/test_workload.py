import pytest
from hypothesis import given, settings, strategies as st

from mtpim.errors import ChannelMismatchError, UnknownPresetError, WorkloadError
from mtpim.workload import (
    BUNDLES,
    PRESETS,
    LayerSpec,
    MultiTenantWorkload,
    TenantSpec,
    build_tenant,
    dump_workload,
    load_bundle,
    load_preset,
    parse_document,
    parse_workload,
)


def kinds(tenant):
    return [layer.kind for layer in tenant.flat_layers]


def test_vgg11_layer_counts():
    t = load_preset("VGG11")
    assert (t.count("conv"), t.count("pool"), t.count("fc")) == (8, 5, 3)


def test_dnn2_structure():
    t = load_preset("DNN2")
    first = t.flat_layers[0]
    assert (first.kind, first.kernel, first.out_channels) == ("conv", 7, 96)
    assert kinds(t) == ["conv", "pool"] * 4 + ["fc"] * 3
    assert [layer.out_channels for layer in t.flat_layers if layer.kind == "fc"] == [512, 512, 100]


@pytest.mark.parametrize("name,convs,pools,head", [
    ("DNN1", 8, 5, [512, 512, 100]),
    ("DNN3", 5, 3, [512, 512, 100]),
    ("DNN4", 16, 4, [4096, 4096, 1000]),
    ("VGG13", 10, 5, [4096, 4096, 1000]),
    ("VGG16", 13, 5, [4096, 4096, 1000]),
    ("VGG19", 16, 5, [4096, 4096, 1000]),
])
def test_preset_shapes(name, convs, pools, head):
    t = load_preset(name)
    assert t.count("conv") == convs
    assert t.count("pool") == pools
    assert [layer.out_channels for layer in t.flat_layers if layer.kind == "fc"] == head


def test_vgg16_ambiguous_block_is_literal():
    outs = [layer.out_channels for layer in load_preset("VGG16").flat_layers if layer.kind == "conv"]
    assert outs == [64, 64, 128, 128, 256, 256, 256, 512, 512, 256, 512, 512, 256]


def test_vgg16_feature_maps():
    t = load_preset("VGG16")
    pools = [s.out_height for layer, s in zip(t.flat_layers, t.shapes) if layer.kind == "pool"]
    assert pools == [112, 56, 28, 14, 7]
    fc1 = next(layer for layer in t.flat_layers if layer.kind == "fc")
    assert fc1.in_channels == 256 * 7 * 7


def test_pool_rounds_up_odd_maps():
    t = build_tenant("odd", (7, 5, 1), [{"kind": "conv", "kernel": 3, "out": 2}, {"kind": "pool"}])
    assert (t.shapes[-1].out_height, t.shapes[-1].out_width) == (4, 3)


def test_valid_padding_shrinks():
    t = build_tenant("v", (8, 8, 1), [{"kind": "conv", "kernel": 3, "out": 2, "padding": "valid"}])
    assert t.shapes[0].out_height == 6


@pytest.mark.parametrize("name", PRESETS)
def test_every_preset_validates(name):
    t = load_preset(name)
    assert t.shapes[-1].out_height == 1


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        load_preset("VGG99")


def test_bundles():
    assert [t.name for t in load_bundle("MT1").tenants] == ["DNN4", "VGG11", "VGG16"]
    assert [t.name for t in load_bundle("MT7").tenants] == ["VGG11", "VGG13", "VGG16", "VGG19"]
    assert len(BUNDLES) == 8
    with pytest.raises(UnknownPresetError):
        load_bundle("MT0")


def test_repeat_expansion_chains_channels():
    layer = LayerSpec("conv", 3, 64, kernel=3, repeat=3)
    chain = [(x.in_channels, x.out_channels) for x in layer.expand()]
    assert chain == [(3, 64), (64, 64), (64, 64)]


@pytest.mark.parametrize("kwargs", [
    dict(kind="conv", in_channels=0, out_channels=1, kernel=3),
    dict(kind="conv", in_channels=1, out_channels=1, kernel=0),
    dict(kind="fc", in_channels=4, out_channels=1, kernel=3),
    dict(kind="pool", in_channels=4, out_channels=5, kernel=2, stride=2),
    dict(kind="lstm", in_channels=1, out_channels=1),
])
def test_layer_validation(kwargs):
    with pytest.raises(WorkloadError):
        LayerSpec(**kwargs)


def test_tenant_channel_mismatch():
    layers = (LayerSpec("conv", 3, 64, kernel=3), LayerSpec("conv", 32, 64, kernel=3))
    with pytest.raises(ChannelMismatchError):
        TenantSpec("bad", 8, 8, 3, layers)


def test_duplicate_tenant_names():
    t = load_preset("DNN3")
    with pytest.raises(WorkloadError):
        MultiTenantWorkload((t, t))


def test_single_tenant_rejected():
    with pytest.raises(WorkloadError):
        MultiTenantWorkload((load_preset("DNN3"),))


DOC = """
name = "demo"

[chip]
preset = "chip1"

[[tenant]]
preset = "VGG16"

[[tenant]]
preset = "DNN3"
name = "small"
input = [64, 64, 3]

[[tenant]]
name = "tiny"
input = [8, 8, 3]
layers = [
  {kind = "conv", kernel = 3, in = 3, out = 16, stride = 1, repeat = 2},
  {kind = "pool", kernel = 2, stride = 2},
  {kind = "fc", in = 256, out = 10},
]
"""


def test_parse_document():
    doc = parse_document(DOC)
    names = [t.name for t in doc.workload.tenants]
    assert names == ["VGG16", "small", "tiny"]
    assert doc.chip == {"preset": "chip1"}
    assert doc.workload.tenants[1].input_height == 64
    tiny = doc.workload.tenants[2]
    assert len(tiny.layers) == 3
    assert kinds(tiny) == ["conv", "conv", "pool", "fc"]


def test_two_presets():
    w = parse_workload('[[tenant]]\npreset = "DNN1"\n[[tenant]]\npreset = "DNN2"\n')
    assert len(w.tenants) == 2


def test_inline_two_layer_net():
    text = """
[[tenant]]
preset = "DNN1"
[[tenant]]
name = "two"
input = [4, 4, 1]
layers = [{kind = "conv", kernel = 3, out = 4}, {kind = "fc", out = 2}]
"""
    two = parse_workload(text).tenants[1]
    assert len(two.layers) == 2
    assert two.layers[1].in_channels == 64


def test_channel_mismatch_names_field_and_line():
    text = """[[tenant]]
preset = "DNN1"

[[tenant]]
name = "bad"
input = [8, 8, 3]
layers = [
  {kind = "conv", kernel = 3, in = 3, out = 64},
  {kind = "conv", kernel = 3, in = 32, out = 64},
]
"""
    with pytest.raises(ChannelMismatchError) as info:
        parse_workload(text)
    assert info.value.field == "tenant[1].layers[1].in"
    assert info.value.line == 9


def test_nonpositive_dimension():
    text = '[[tenant]]\npreset = "DNN1"\n[[tenant]]\npreset = "DNN2"\ninput = [0, 32, 3]\n'
    with pytest.raises(WorkloadError) as info:
        parse_workload(text)
    assert info.value.field == "tenant[1].input"
    assert info.value.line == 3


def test_syntax_error():
    with pytest.raises(WorkloadError, match="syntax"):
        parse_workload("[[tenant]\npreset = ")


def test_round_trip_doc():
    w = parse_workload(DOC)
    assert parse_workload(dump_workload(w)) == w


@st.composite
def workloads(draw):
    tenants = []
    for i in range(draw(st.integers(2, 3))):
        h = draw(st.integers(1, 12))
        c = draw(st.integers(1, 5))
        rows = []
        for _ in range(draw(st.integers(1, 4))):
            kind = draw(st.sampled_from(["conv", "pool", "fc"]))
            if kind == "conv":
                rows.append({"kind": "conv", "kernel": draw(st.integers(1, 3)),
                             "out": draw(st.integers(1, 16)), "repeat": draw(st.integers(1, 3))})
            elif kind == "pool":
                rows.append({"kind": "pool", "stride": draw(st.integers(1, 3)), "kernel": 2})
            else:
                rows.append({"kind": "fc", "out": draw(st.integers(1, 16))})
        tenants.append(build_tenant(f"t{i}", (h, h, c), rows))
    return MultiTenantWorkload(tuple(tenants), name="gen")


@given(workloads())
@settings(max_examples=60, deadline=None)
def test_round_trip_property(w):
    assert parse_workload(dump_workload(w)) == w
