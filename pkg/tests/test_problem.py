"""Problem model: validation, coefficient paths, JSON round trips."""

import json

import numpy as np
import pytest

from helpers import const, random_problem, scalar_problem

from jumplq import (CoefficientPath, OutOfHorizon, ProblemFormatError, ProblemValidationError,
                    TimeGrid, homogeneous_part, load_problem, problem_from_dict, problem_to_dict,
                    save_problem, validate, validation_errors, with_steps)


def minimal_doc():
    # Smallest well-formed document: one state, one control, no marks.
    zero11 = {"const": [[0.0]]}
    zero1 = {"const": [0.0]}
    return {
        "n": 1, "m": 1,
        "grid": {"t0": 0.0, "T": 1.0, "steps": 4},
        "marks": [],
        "A": zero11, "B": zero11, "C": zero11, "D": zero11,
        "F": [], "G": [],
        "b": zero1, "sigma": zero1, "f": [],
        "Q": zero11, "S": zero11, "R": zero11,
        "q": zero1, "rho": zero1,
        "H": [[0.0]], "g": [0.0], "x0": [1.0],
    }


def test_minimal_document_validates():
    prob = validate(problem_from_dict(minimal_doc()))
    assert prob.n == 1 and prob.m == 1 and prob.K == 0
    assert prob.grid.steps == 4


def test_validate_returns_wrapper_with_coefficient_access():
    rng = np.random.default_rng(0)
    spec = random_problem(rng)
    prob = validate(spec)
    t = prob.times[3]
    assert prob.A(t).shape == (3, 3)
    assert prob.Gs(t).shape == (2, 3, 2)
    assert prob.fs(t).shape == (2, 3)
    assert prob.weights.shape == (2,)


def test_dimension_mismatch_is_reported_with_field_name():
    spec = scalar_problem()
    spec.B = const(0.0, (2, 1))
    errors = validation_errors(spec)
    assert len(errors) == 1 and "B" in errors[0]


def test_sampled_path_wrong_length_is_reported():
    spec = scalar_problem(steps=10)
    spec.A = CoefficientPath.sampled(np.zeros((5, 1, 1)))
    errors = validation_errors(spec)
    assert any("A" in e and "5 samples" in e for e in errors)


def test_negative_intensity_is_reported():
    spec = scalar_problem(F=(1.0,), G=(0.0,), pis=(-0.5,), fj=(0.0,))
    errors = validation_errors(spec)
    assert any("pi" in e for e in errors)


def test_asymmetric_weight_is_reported_with_sample_index():
    rng = np.random.default_rng(1)
    spec = random_problem(rng, steps=6)
    R = np.tile(np.eye(2), (7, 1, 1))
    R[0, 0, 1] = 0.3
    spec.R = CoefficientPath.sampled(R)
    errors = validation_errors(spec)
    assert any("R" in e and "sample 0" in e for e in errors)


def test_non_finite_entries_are_reported():
    spec = scalar_problem()
    spec.sigma = const(np.inf, (1,))
    errors = validation_errors(spec)
    assert any("sigma" in e for e in errors)


def test_all_violations_are_collected():
    spec = scalar_problem()
    spec.B = const(0.0, (2, 1))
    spec.q = const(np.nan, (1,))
    with pytest.raises(ProblemValidationError) as info:
        validate(spec)
    assert len(info.value.errors) == 2


def test_constant_path_evaluates_everywhere():
    grid = TimeGrid(0.0, 2.0, 10)
    path = const(3.5, (1,))
    assert path.at(0.0, grid)[0] == 3.5
    assert path.at(1.234, grid)[0] == 3.5
    assert path.at(2.0, grid)[0] == 3.5


def test_sampled_path_reproduces_grid_points_exactly():
    grid = TimeGrid(0.25, 1.25, 8)
    values = np.random.default_rng(2).standard_normal((9, 2, 2))
    path = CoefficientPath.sampled(values)
    for k, t in enumerate(grid.times()):
        assert np.array_equal(path.at(t, grid), values[k])


def test_sampled_path_interpolates_linearly():
    grid = TimeGrid(0.0, 1.0, 4)
    values = np.arange(5.0)[:, None]
    path = CoefficientPath.sampled(values)
    assert path.at(0.125, grid)[0] == pytest.approx(0.5)
    assert path.at(0.6, grid)[0] == pytest.approx(2.4)


def test_evaluation_outside_horizon_raises():
    grid = TimeGrid(0.0, 1.0, 4)
    path = const(1.0, (1,))
    with pytest.raises(OutOfHorizon):
        path.at(1.5, grid)
    with pytest.raises(OutOfHorizon):
        path.at(-0.1, grid)


def test_json_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    spec = random_problem(rng, steps=12, inhomogeneous=True)
    # Mix in a sampled path to cover both encodings.
    samples = rng.standard_normal((13, 3, 3))
    spec.A = CoefficientPath.sampled(samples)
    target = tmp_path / "prob.json"
    save_problem(spec, target)
    again = load_problem(target)
    assert again == spec
    save_problem(again, tmp_path / "prob2.json")
    assert (tmp_path / "prob.json").read_bytes() == (tmp_path / "prob2.json").read_bytes()


def test_missing_key_is_a_format_error():
    doc = minimal_doc()
    del doc["H"]
    with pytest.raises(ProblemFormatError, match="H"):
        problem_from_dict(doc)


def test_unknown_key_is_a_format_error():
    doc = minimal_doc()
    doc["extra"] = 1
    with pytest.raises(ProblemFormatError, match="extra"):
        problem_from_dict(doc)


def test_path_must_have_exactly_one_encoding():
    doc = minimal_doc()
    doc["A"] = {"const": [[0.0]], "sampled": [[[0.0]]]}
    with pytest.raises(ProblemFormatError, match="A"):
        problem_from_dict(doc)


def test_non_numeric_payload_is_a_format_error():
    doc = minimal_doc()
    doc["Q"] = {"const": [["x"]]}
    with pytest.raises(ProblemFormatError, match="Q"):
        problem_from_dict(doc)


def test_mark_count_mismatch_is_a_format_error():
    doc = minimal_doc()
    doc["marks"] = [{"id": "e0", "pi": 0.5}]
    with pytest.raises(ProblemFormatError, match="F"):
        problem_from_dict(doc)


def test_parse_error_reports_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1,,}')
    with pytest.raises(ProblemFormatError, match="line 1"):
        load_problem(bad)


def test_with_steps_resamples_onto_refined_grid():
    rng = np.random.default_rng(4)
    spec = random_problem(rng, steps=10)
    samples = rng.standard_normal((11, 3, 3))
    spec.A = CoefficientPath.sampled(samples)
    fine = with_steps(spec, 20)
    assert fine.grid.steps == 20
    assert fine.A.samples.shape == (21, 3, 3)
    # Refinement by 2 keeps the original samples at even indices.
    assert np.allclose(fine.A.samples[::2], samples, atol=1e-12)
    # Constants pass through untouched.
    assert fine.B is spec.B
    assert validate(fine).n == 3


def test_homogeneous_part_zeroes_offsets_only():
    spec = scalar_problem(A=0.3, B=1.0, b=1.0, sigma=0.5, q=0.2, rho=0.1,
                          Q=1.0, R=1.0, H=2.0, g=0.7, x0=1.5,
                          F=(0.2,), G=(0.1,), pis=(0.5,), fj=(0.3,))
    hom = validate(homogeneous_part(spec))
    t = hom.times[0]
    assert hom.b(t)[0] == 0.0 and hom.sigma(t)[0] == 0.0 and hom.fs(t)[0, 0] == 0.0
    assert hom.q(t)[0] == 0.0 and hom.rho(t)[0] == 0.0
    assert np.all(hom.g == 0.0) and np.all(hom.x0 == 0.0)
    assert hom.A(t)[0, 0] == 0.3 and hom.H[0, 0] == 2.0


def test_problem_to_dict_matches_schema_keys():
    spec = scalar_problem(F=(1.0,), G=(0.0,), pis=(1.0,), fj=(0.0,))
    doc = problem_to_dict(spec)
    assert set(doc) == {"n", "m", "grid", "marks", "A", "B", "C", "D", "F", "G",
                        "b", "sigma", "f", "Q", "S", "R", "q", "rho", "H", "g", "x0"}
    assert doc["marks"] == [{"id": "e0", "pi": 1.0}]
    json.dumps(doc)  # serializable without numpy leakage
