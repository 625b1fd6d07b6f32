#include "doctest.h"

#include "certkit/io.hpp"
#include "certkit/model.hpp"

using namespace certkit;

TEST_CASE("case-study model is consistent") {
    const StochasticLti m = case_study_model();
    CHECK_NOTHROW(m.validate());
    CHECK(m.states() == 3);
    CHECK(m.inputs() == 2);
    CHECK(m.measurements() == 2);
    CHECK(m.outputs() == 2);
    CHECK(m.process_noise() == 3);
    CHECK(m.sensor_noise() == 2);
}

TEST_CASE("validate rejects inconsistent shapes and indefinite P0") {
    StochasticLti m = case_study_model();
    m.B = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(m.validate(), DimensionError);
    m = case_study_model();
    m.x0 = Vector::Zero(2);
    CHECK_THROWS_AS(m.validate(), DimensionError);
    m = case_study_model();
    m.P0(0, 0) = -1.0;
    CHECK_THROWS_AS(m.validate(), ShapeError);
    m = case_study_model();
    m.P0(0, 1) = 0.5;
    CHECK_THROWS_AS(m.validate(), ShapeError);
}

TEST_CASE("step and outputs") {
    const StochasticLti m = case_study_model();
    const Vector x = make_vector({20, 21, 1});
    const Vector u = make_vector({15, 16});
    const Vector w1 = make_vector({1, -1, 0.5});
    CHECK((step(m, x, u, w1) - (m.A * x + m.B * u + m.F * w1)).norm() < 1e-15);
    CHECK((step(noiseless(m), x, u) - (m.A * x + m.B * u)).norm() < 1e-15);
    const Measurement meas = outputs(m, x, make_vector({1, 2}));
    CHECK(meas.y(0) == doctest::Approx(20.05));
    CHECK(meas.y(1) == doctest::Approx(1.10));
    CHECK((meas.z - make_vector({20, 21})).norm() == 0.0);
    CHECK_THROWS_AS(step(m, x, u, make_vector({1})), DimensionError);
}

TEST_CASE("planar submodel") {
    const DeterministicLti p = planar_submodel(noiseless(case_study_model()));
    CHECK(p.states() == 2);
    CHECK(p.A(0, 1) == 0.0625);
    CHECK(p.B(1, 1) == 0.06);
    CHECK(p.x0(1) == 14.0);
    DeterministicLti coupled = noiseless(case_study_model());
    coupled.A(2, 0) = 0.1;
    CHECK_THROWS_AS(planar_submodel(coupled), StructureError);
    DeterministicLti driven = noiseless(case_study_model());
    driven.B(2, 0) = 1.0;
    CHECK_THROWS_AS(planar_submodel(driven), StructureError);
}

TEST_CASE("shipped model file equals the built-in preset") {
    const StochasticLti file = model_from_json(read_json_file(CERTKIT_DATA_DIR "/building.json"));
    const StochasticLti preset = case_study_model();
    CHECK(file.A == preset.A);
    CHECK(file.B == preset.B);
    CHECK(file.C == preset.C);
    CHECK(file.H == preset.H);
    CHECK(file.F == preset.F);
    CHECK(file.E == preset.E);
    CHECK(file.x0 == preset.x0);
    CHECK(file.P0 == preset.P0);
    CHECK(model_hash(file) == model_hash(preset));
}
