import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waveduo.model import (
    CATALOG,
    CoefficientProfile,
    GridSpec,
    InitialData,
    PhysicalConfig,
    ValidationError,
    default_initial_data,
    initial_data_from_selector,
    named_case,
    parse_profile,
    sample_profile,
    sine_initial_data,
)


def test_grid_nodes_span_unit_interval():
    g = GridSpec(100)
    x = g.nodes
    assert x.size == 102
    assert x[0] == 0.0 and x[-1] == 1.0
    assert g.dx * (g.N + 1) == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(np.diff(x), g.dx, atol=1e-15)


@pytest.mark.parametrize("N", [0, 1, -3, 2.5, True])
def test_grid_rejects_bad_sizes(N):
    with pytest.raises(ValidationError):
        GridSpec(N)


def test_b3_is_one_at_x_015():
    assert named_case("b3")(0.15) == 1.0
    # and at every N=100 node inside either interval
    g = GridSpec(100)
    v = sample_profile(named_case("b3"), g)
    inside = (g.nodes >= 0.1) & (g.nodes <= 0.2) | (g.nodes >= 0.8) & (g.nodes <= 0.9)
    assert np.array_equal(v, inside.astype(float))


def test_zero_profile_samples_to_zero():
    assert np.all(sample_profile(CoefficientProfile(), GridSpec(7)) == 0.0)


def test_overlapping_pieces_sum_on_closed_intervals():
    p = CoefficientProfile(((0.0, 0.5, 1.0), (0.5, 1.0, 1.0)))
    assert p(0.5) == 2.0
    assert p(0.25) == 1.0 and p(0.75) == 1.0


def test_named_cases_match_catalog():
    assert named_case("b4").pieces == ((0.1, 0.2, 1.0),)
    assert named_case("c1").pieces == ()
    assert named_case("b2").pieces == ((0.0, 1.0, 1.0),)
    assert named_case("c5").pieces == ((0.4, 0.6, 1.0),)
    assert named_case("c3").damping and not named_case("b3").damping
    assert len(CATALOG) == 10


def test_unknown_case_lists_valid_names():
    with pytest.raises(ValidationError, match="b1, b2"):
        named_case("b9")


@pytest.mark.parametrize(
    "text, pieces",
    [
        ("b4", ((0.1, 0.2, 1.0),)),
        ("indicator:0.1-0.2,0.8-0.9@1.0", ((0.1, 0.2, 1.0), (0.8, 0.9, 1.0))),
        ("indicator:0.4-0.6", ((0.4, 0.6, 1.0),)),
        ("indicator:0.1-0.2@-2.5", ((0.1, 0.2, -2.5),)),
        ("indicator:0-0.5@1;indicator:0.5-1@3", ((0.0, 0.5, 1.0), (0.5, 1.0, 3.0))),
        ("indicator:", ()),
    ],
)
def test_parse_profile(text, pieces):
    assert parse_profile(text).pieces == pieces


@pytest.mark.parametrize("text", ["b9", "indicator:0.3-0.2", "indicator:0.1-1.2", "box:0-1", "indicator:a-b"])
def test_parse_profile_rejects(text):
    with pytest.raises(ValidationError):
        parse_profile(text)


def test_damping_profile_must_be_nonnegative():
    with pytest.raises(ValidationError):
        parse_profile("indicator:0.1-0.2@-1", damping=True)
    # overlapping negative piece partly cancelled is still negative somewhere
    with pytest.raises(ValidationError):
        CoefficientProfile(((0.0, 1.0, 1.0), (0.2, 0.3, -2.0)), damping=True)
    CoefficientProfile(((0.0, 1.0, 2.0), (0.2, 0.3, -2.0)), damping=True)


def test_profile_text_roundtrip():
    for text in ["b4", "c3", "indicator:0.1-0.2,0.8-0.9@0.5"]:
        p = parse_profile(text)
        assert parse_profile(p.to_text()).pieces == p.pieces


def test_physical_config_validates_a():
    for a in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(ValidationError):
            PhysicalConfig(a)
    cfg = PhysicalConfig(2.0, named_case("b4"), parse_profile("c3"))
    assert cfg.c.damping


def test_default_initial_data_values():
    d = default_initial_data()
    assert d.u0(0.5) == -0.25
    assert d.u1(0.5) == -0.25
    assert d.y0(0.5) == 0.25
    assert d.y1(0.5) == 0.25
    for f in (d.u0, d.y0):
        assert f(0.0) == 0.0 and f(1.0) == 0.0


def test_initial_data_requires_boundary_compatibility():
    with pytest.raises(ValidationError):
        InitialData(lambda x: x, lambda x: 0 * x, lambda x: 0 * x, lambda x: 0 * x)


def test_selectors():
    assert initial_data_from_selector("paper").name == "paper"
    s = initial_data_from_selector("paper*2")
    assert s.u0(0.5) == -0.5 and s.y1(0.5) == 0.5
    g = GridSpec(10)
    u0, u1, y0, y1 = initial_data_from_selector("sine:2").sample(g)
    assert np.allclose(u0, np.sin(2 * np.pi * g.nodes), atol=1e-15)
    assert not u1.any() and not y0.any() and not y1.any()
    _, _, y0, _ = initial_data_from_selector("sine:1:y").sample(g)
    assert y0.max() > 0.9
    for bad in ("nope", "sine:x", "paper*q", "sine:1:z"):
        with pytest.raises(ValidationError):
            initial_data_from_selector(bad)


def test_tabulated_initial_data_roundtrip():
    g = GridSpec(5)
    vals = [np.r_[0.0, np.arange(1.0, 6.0) * k, 0.0] for k in (1, 2, 3, 4)]
    d = InitialData.from_nodes(g, *vals)
    for got, want in zip(d.sample(g), vals):
        assert np.array_equal(got, want)


def test_sampled_boundary_entries_are_zero():
    g = GridSpec(9)
    for v in sine_initial_data(3).sample(g):
        assert v[0] == 0.0 and v[-1] == 0.0


intervals = st.tuples(
    st.floats(0, 1, allow_nan=False), st.floats(0, 1, allow_nan=False), st.floats(0, 5, allow_nan=False)
).map(lambda t: (min(t[0], t[1]), max(t[0], t[1]), t[2]))


@settings(max_examples=60, deadline=None)
@given(st.lists(intervals, max_size=4), st.integers(2, 300))
def test_damping_samples_are_nonnegative(pieces, N):
    p = CoefficientProfile(tuple(pieces), damping=True)
    assert np.all(sample_profile(p, GridSpec(N)) >= 0.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(intervals, max_size=4), st.integers(2, 60), st.integers(1, 4))
def test_sampling_is_node_local(pieces, N, k):
    # the grid with k(N+1)-1 interior nodes contains every node of the N grid
    p = CoefficientProfile(tuple(pieces))
    coarse = GridSpec(N)
    fine = GridSpec(k * (N + 1) - 1)
    vc = sample_profile(p, coarse)
    vf = sample_profile(p, fine)[::k]
    xc, xf = coarse.nodes, fine.nodes[::k]
    same = xc == xf
    assert np.array_equal(vc[same], vf[same])
