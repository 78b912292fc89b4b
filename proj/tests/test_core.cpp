#include "alrnn/model.hpp"

#include <doctest.h>

#include <limits>
#include <random>

using namespace alrnn;

namespace {

Vec make_vec(std::initializer_list<double> values) {
    Vec v(static_cast<long>(values.size()));
    long i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

ModelParams random_params(int M, int P, int K, std::uint64_t seed,
                          double scale = 0.3) {
    ModelParams params(M, P, K);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    for (int i = M - P; i < M; ++i) params.A_diag[i] = gauss(rng);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) params.W(i, j) = gauss(rng);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < K; ++j) params.C(i, j) = gauss(rng);
    for (int i = 0; i < M; ++i) params.h[i] = gauss(rng);
    return params;
}

} // namespace

TEST_CASE("phi_star basic behavior") {
    const Vec z = make_vec({-1.0, 2.0, -3.0});
    CHECK(phi_star(z, 0) == z);                            // identity at P=0
    CHECK(phi_star(z, 3) == make_vec({0.0, 2.0, 0.0}));    // full ReLU
    CHECK(phi_star(z, 1) == make_vec({-1.0, 2.0, 0.0}));   // last coord only
    CHECK_THROWS_AS(phi_star(z, 4), std::invalid_argument);
    CHECK_THROWS_AS(phi_star(z, -1), std::invalid_argument);
}

TEST_CASE("step zero fixed input") {
    ModelParams params = random_params(4, 2, 3, 1);
    params.h.setZero();
    const Vec z = Vec::Zero(4);
    CHECK(step(params, z, Vec::Zero(3)) == Vec::Zero(4));
}

TEST_CASE("step reduces to linear map at P=0") {
    ModelParams params = random_params(3, 0, 2, 2);
    CHECK(params.A_diag == Vec::Zero(3)); // A vanishes by construction
    const Vec z = make_vec({0.5, -1.0, 2.0});
    const Vec s = make_vec({1.0, -0.5});
    const Vec expected = params.W * z + params.C * s + params.h;
    CHECK((step(params, z, s) - expected).norm() == 0.0);
}

TEST_CASE("step scalar hand case") {
    ModelParams params(1, 1, 1);
    params.A_diag[0] = 0.5;
    params.W(0, 0) = 0.25;
    params.h[0] = 1.0;
    params.C(0, 0) = 0.0;
    const Vec z = make_vec({2.0});
    CHECK(step(params, z, Vec::Zero(1))[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("step rejects dimension mismatch") {
    ModelParams params = random_params(3, 1, 2, 2);
    CHECK_THROWS_AS(step(params, Vec::Zero(2), Vec::Zero(2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(step(params, Vec::Zero(3), Vec::Zero(3)),
                    std::invalid_argument);
}

TEST_CASE("rollout empty, contraction, and step equivalence") {
    ModelParams params = random_params(3, 0, 1, 3);
    params.W *= 0.1; // spectral radius well below 1
    params.h.setZero();

    const Trajectory empty = rollout(params, Vec::Zero(3), Mat::Zero(1, 0));
    CHECK(empty.length() == 0);

    const Mat zeros = Mat::Zero(1, 50);
    const Vec z0 = make_vec({1.0, -2.0, 0.5});
    const Trajectory traj = rollout(params, z0, zeros);
    CHECK(traj.states.col(49).norm() < 1e-10);
    CHECK(traj.states.col(10).norm() < traj.states.col(0).norm());

    // bit-for-bit equal to sequential step calls
    Vec z = z0;
    for (long t = 0; t < 50; ++t) {
        z = step(params, z, zeros.col(t));
        CHECK(traj.states.col(t) == z);
    }
}

TEST_CASE("rollout determinism is bit-identical") {
    ModelParams params = random_params(5, 3, 2, 7);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat inputs(2, 40);
    for (long i = 0; i < inputs.size(); ++i) inputs(i / 40, i % 40) = gauss(rng);
    const Vec z0 = make_vec({0.1, -0.2, 0.3, -0.4, 0.5});
    const Trajectory a = rollout(params, z0, inputs);
    const Trajectory b = rollout(params, z0, inputs);
    CHECK(a.states == b.states);
}

TEST_CASE("bitcode_of formula") {
    const Vec z = make_vec({9.0, -1.0, 2.0, -0.5});
    const Bitcode code = bitcode_of(z, 3); // last three coords: -1, 2, -0.5
    CHECK(code.bits == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(code.value == 2);
    CHECK(code.key() == "010");

    const Bitcode empty = bitcode_of(z, 0);
    CHECK(empty.value == 0);
    CHECK(empty.bits.empty());

    // exact zero is "off" (strict inequality)
    CHECK(bitcode_of(make_vec({0.0}), 1).value == 0);
}

TEST_CASE("bitcode key/value round trips") {
    const Bitcode c = Bitcode::from_value(5, 4);
    CHECK(c.key() == "0101");
    CHECK(Bitcode::from_key("0101") == c);
    CHECK(Bitcode::from_key(c.key()).value == 5);
}

TEST_CASE("bitcode range over reachable states") {
    ModelParams params = random_params(4, 3, 1, 13);
    const Trajectory traj =
        rollout(params, Vec::Zero(4), Mat::Random(1, 200));
    for (long t = 0; t < traj.length(); ++t) {
        const Bitcode code = bitcode_of(traj.states.col(t), 3);
        CHECK(code.value < 8);
    }
}

TEST_CASE("readout_apply") {
    Readout identity{Mat::Identity(2, 2), Vec::Zero(2)};
    const Vec z = make_vec({3.0, -1.0});
    CHECK(readout_apply(identity, z) == z);
    CHECK(readout_apply(identity, Vec::Zero(2)) == Vec::Zero(2));

    Readout r{Mat(1, 2), make_vec({0.5})};
    r.D << 1.0, -1.0;
    CHECK(readout_apply(r, make_vec({2.0, 1.0}))[0] ==
          doctest::Approx(1.5).epsilon(1e-15));
    CHECK(readout_apply(r, Vec::Zero(2))[0] == 0.5); // z=0 gives bias

    CHECK_THROWS_AS(readout_apply(r, Vec::Zero(3)), std::invalid_argument);
}

TEST_CASE("P=0 superposition") {
    ModelParams params = random_params(6, 0, 1, 21);
    params.h.setZero();
    const Vec s = Vec::Zero(1);
    std::mt19937_64 rng(22);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Vec z1(6), z2(6);
        for (int i = 0; i < 6; ++i) {
            z1[i] = gauss(rng);
            z2[i] = gauss(rng);
        }
        const Vec lhs = step(params, z1, s) + step(params, z2, s) -
                        step(params, Vec::Zero(6), s);
        const Vec rhs = step(params, z1 + z2, s);
        CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("fully-active trajectory equals linear dynamics") {
    ModelParams params = random_params(4, 4, 1, 31, 0.05);
    params.h = Vec::Constant(4, 10.0); // keeps every coordinate positive
    const Mat zeros = Mat::Zero(1, 20);
    const Vec z0 = Vec::Constant(4, 5.0);
    const Trajectory traj = rollout(params, z0, zeros);

    const Mat effective =
        Mat(params.A_diag.asDiagonal()) + params.W; // diag(A) + W
    Vec z = z0;
    for (long t = 0; t < 20; ++t) {
        REQUIRE(traj.states.col(t).minCoeff() > 0.0);
        z = effective * z + params.h;
        CHECK((traj.states.col(t) - z).lpNorm<Eigen::Infinity>() < 1e-9);
    }
}

TEST_CASE("A-zeroing invariant and validation") {
    ModelParams params(5, 2, 1);
    CHECK(params.A_diag.head(3) == Vec::Zero(3));

    params.A_diag[0] = 0.7;
    params.enforce_structure();
    CHECK(params.A_diag[0] == 0.0);

    params.A_diag[1] = 1e-30; // any nonzero linear entry is invalid
    CHECK_THROWS_AS(params.validate(), std::invalid_argument);
    params.enforce_structure();
    CHECK_NOTHROW(params.validate());

    params.W(2, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(params.validate(), std::invalid_argument);
}
