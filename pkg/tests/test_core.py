import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clsbp.data import (
    ObservationSet,
    SamplerConfig,
    build_feature_maps,
    load_observations,
    validate,
)
from clsbp.errors import (
    EmptyData,
    MissingPropensity,
    NonBinaryTreatment,
    NonFiniteValue,
    PropensityOutOfRange,
)


def test_minimal_valid_set():
    validate(ObservationSet(y=[1.0], z=[0], x=[[0.5]]))


def test_non_binary_treatment():
    with pytest.raises(NonBinaryTreatment, match="row 0"):
        validate(ObservationSet(y=[1.0], z=[2], x=[[0.5]]))


def test_propensity_out_of_range():
    with pytest.raises(PropensityOutOfRange, match="row 0"):
        validate(ObservationSet(y=[1.0], z=[0], x=[[0.5]], pi_hat=[1.0]))
    with pytest.raises(PropensityOutOfRange):
        validate(ObservationSet(y=[1.0], z=[0], x=[[0.5]], pi_hat=[0.0]))


def test_non_finite_values():
    with pytest.raises(NonFiniteValue, match="y"):
        validate(ObservationSet(y=[np.nan], z=[0], x=[[0.5]]))
    with pytest.raises(NonFiniteValue, match="column 1"):
        validate(ObservationSet(y=[1.0], z=[0], x=[[0.5, np.inf]]))


def test_empty_data():
    with pytest.raises(EmptyData):
        validate(ObservationSet(y=[], z=[], x=np.empty((0, 1))))


def test_mismatched_lengths_rejected():
    with pytest.raises(ValueError):
        ObservationSet(y=[1.0, 2.0], z=[0], x=[[0.5]])


def test_arrays_frozen():
    obs = ObservationSet(y=[1.0], z=[0], x=[[0.5]])
    with pytest.raises(ValueError):
        obs.y[0] = 2.0


def _cfg(**kw):
    base = dict(H=2, burn_in=0, keep=1, standardize=False)
    base.update(kw)
    return SamplerConfig(**base)


def test_phi_full_treated_row():
    obs = ObservationSet(y=[0.0], z=[1], x=[[2.0, 3.0]])
    maps = build_feature_maps(obs, _cfg())
    assert np.array_equal(maps.phi_full[0], [1, 2, 3, 1, 2, 3])


def test_phi_full_control_row_zeroes_treatment_block():
    obs = ObservationSet(y=[0.0], z=[0], x=[[2.0, 3.0]])
    maps = build_feature_maps(obs, _cfg())
    assert np.array_equal(maps.phi_full[0], [1, 2, 3, 0, 0, 0])


def test_phi_full_with_propensity_column():
    obs = ObservationSet(y=[0.0], z=[1], x=[[2.0]], pi_hat=[0.7])
    maps = build_feature_maps(
        obs, _cfg(include_pscore_in_atoms=True, include_pscore_in_weights=True)
    )
    assert np.allclose(maps.phi_full[0], [1, 2, 0.7, 1, 2, 0.7])
    assert np.allclose(maps.psi[0], [1, 2, 0.7])


def test_missing_propensity():
    obs = ObservationSet(y=[0.0], z=[1], x=[[2.0]])
    with pytest.raises(MissingPropensity):
        build_feature_maps(obs, _cfg(include_pscore_in_atoms=True))


def test_maps_deterministic():
    rng = np.random.default_rng(0)
    obs = ObservationSet(y=rng.normal(size=20), z=rng.integers(0, 2, 20), x=rng.normal(size=(20, 3)))
    cfg = SamplerConfig(H=3, burn_in=0, keep=1)
    a = build_feature_maps(obs, cfg)
    b = build_feature_maps(obs, cfg)
    for name in ("phi_beta", "phi_gamma", "psi", "phi_full"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_intercept_columns():
    rng = np.random.default_rng(1)
    obs = ObservationSet(
        y=rng.normal(size=15), z=rng.integers(0, 2, 15), x=rng.normal(size=(15, 2)),
        pi_hat=rng.uniform(0.2, 0.8, 15),
    )
    maps = build_feature_maps(
        obs, SamplerConfig(include_pscore_in_atoms=True, include_pscore_in_weights=True)
    )
    for m in (maps.phi_beta, maps.phi_gamma, maps.psi):
        assert np.all(m[:, 0] == 1.0)


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_treatment_block_scaling(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    obs = ObservationSet(
        y=rng.normal(size=n), z=rng.integers(0, 2, n), x=rng.normal(size=(n, 2))
    )
    maps = build_feature_maps(obs, SamplerConfig())
    assert np.array_equal(maps.phi_full[:, : maps.p_beta], maps.phi_beta)
    assert np.array_equal(maps.phi_full[:, maps.p_beta :], obs.z[:, None] * maps.phi_gamma)


def test_standardization_roundtrip():
    rng = np.random.default_rng(2)
    x = np.column_stack(
        [rng.normal(50, 9, 40), rng.integers(0, 2, 40).astype(float), rng.normal(0, 1e-3, 40)]
    )
    obs = ObservationSet(y=rng.normal(size=40), z=rng.integers(0, 2, 40), x=x)
    maps = build_feature_maps(obs, SamplerConfig(standardize=True))
    tr = maps.transform
    # binary column untouched
    assert tr.shift[1] == 0.0 and tr.scale[1] == 1.0
    back = tr.invert(tr.apply(x))
    rel = np.abs(back - x) / np.maximum(np.abs(x), 1.0)
    assert rel.max() < 1e-12
    # standardized continuous columns have zero mean, unit sd
    xs = tr.apply(x)
    assert abs(xs[:, 0].mean()) < 1e-12 and abs(xs[:, 0].std() - 1.0) < 1e-12


def test_profile_rows_match_matrix_rows():
    rng = np.random.default_rng(3)
    obs = ObservationSet(
        y=rng.normal(size=25), z=rng.integers(0, 2, 25), x=rng.normal(5, 2, (25, 3)),
        pi_hat=rng.uniform(0.1, 0.9, 25),
    )
    cfg = SamplerConfig(include_pscore_in_atoms=True, include_pscore_in_weights=True)
    maps = build_feature_maps(obs, cfg)
    for i in (0, 7, 24):
        rows = maps.profile_rows(obs.x[i], obs.pi_hat[i])
        assert np.allclose(rows.phi_beta, maps.phi_beta[i])
        assert np.allclose(rows.psi, maps.psi[i])
        assert np.allclose(rows.phi_full(obs.z[i]), maps.phi_full[i])


def test_profile_rows_demand_propensity():
    tr_obs = ObservationSet(y=[0.0], z=[1], x=[[2.0]], pi_hat=[0.5])
    maps = build_feature_maps(tr_obs, _cfg(include_pscore_in_atoms=True))
    with pytest.raises(MissingPropensity):
        maps.profile_rows([2.0])


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text(
        "y,z,x1,x2,pihat,extra\n"
        "1.5,1,0.2,3.0,0.4,ignored\n"
        "-0.5,0,1.2,-1.0,0.6,ignored\n",
        encoding="utf-8",
    )
    obs = load_observations(path)
    assert obs.n == 2 and obs.d == 2
    assert np.allclose(obs.y, [1.5, -0.5])
    assert np.allclose(obs.pi_hat, [0.4, 0.6])
    validate(obs)


def test_csv_header_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("y,z,x1,x3\n1,0,1,2\n", encoding="utf-8")
    with pytest.raises(EmptyData, match="without gaps"):
        load_observations(bad)
    nox = tmp_path / "nox.csv"
    nox.write_text("y,z\n1,0\n", encoding="utf-8")
    with pytest.raises(EmptyData):
        load_observations(nox)


def test_config_invariants():
    with pytest.raises(ValueError):
        SamplerConfig(H=-1)
    with pytest.raises(ValueError):
        SamplerConfig(keep=0)
    with pytest.raises(ValueError):
        SamplerConfig(thin=0)
    with pytest.raises(ValueError):
        SamplerConfig(nu0=0.0)
