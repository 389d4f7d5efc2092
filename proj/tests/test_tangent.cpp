#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <random>

#include "clvshadow/tangent.hpp"
#include "oracles.hpp"

using namespace clvshadow;

namespace {

SystemSpec scalar_decay() {
    SystemSpec spec;
    spec.name = "scalar-decay";
    spec.dim = 1;
    spec.drift = [](const Vec& u, double) { return Vec(-u); };
    spec.drift_jac_u = [](const Vec&, double) { return Mat(-Mat::Identity(1, 1)); };
    spec.objective = [](const Vec& u, double) { return u[0]; };
    spec.finalize();
    return spec;
}

MapSpec halving_map() {
    MapSpec spec;
    spec.name = "halving";
    spec.dim = 1;
    spec.step = [](const Vec& u, double) { return Vec(0.5 * u); };
    spec.step_jac_u = [](const Vec&, double) { return Mat(0.5 * Mat::Identity(1, 1)); };
    spec.objective = [](const Vec& u, double) { return u[0]; };
    spec.finalize();
    return spec;
}

Trajectory lorenz_orbit(double horizon, double h, double spin = 100.0) {
    const auto& entry = flow_registry("lorenz63");
    Vec u0 = spinup(entry.spec, entry.defaults.u0, entry.defaults.parameter, spin, h);
    int n = static_cast<int>(std::lround(horizon / h));
    return integrate(entry.spec, u0, entry.defaults.parameter, h, n);
}

} // namespace

TEST_CASE("zero initial data stays zero") {
    Trajectory ltraj = lorenz_orbit(1.0, 0.01, 20.0);
    auto sol = solve_homogeneous_tangent(flow_registry("lorenz63").spec, ltraj, 0, 100,
                                         Vec::Zero(3));
    for (const Vec& v : sol.values) CHECK(v.norm() == 0.0);

    const auto& cat = map_registry("catmap");
    Trajectory mtraj = iterate(cat.spec, oracle::vec2(0.2, 0.3), 0.05, 50);
    auto msol = solve_homogeneous_tangent(cat.spec, mtraj, 0, 50, Vec::Zero(2));
    for (const Vec& v : msol.values) CHECK(v.norm() == 0.0);
}

TEST_CASE("drift along an orbit solves the homogeneous tangent equation") {
    const auto& entry = flow_registry("lorenz63");
    Trajectory traj = lorenz_orbit(1.0, 0.005);
    Vec w0 = entry.spec.drift(traj.states[0], traj.parameter);
    auto sol = solve_homogeneous_tangent(entry.spec, traj, 0, traj.steps(), w0);
    double worst = 0.0;
    for (int i = 0; i <= traj.steps(); ++i) {
        Vec f = entry.spec.drift(traj.states[i], traj.parameter);
        worst = std::max(worst, (sol.at(i) - f).norm() / f.norm());
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("linear saddle tangent growth matches the matrix exponential") {
    const auto& entry = flow_registry("linear-saddle");
    const double s = 1.5, h = 0.005;
    Trajectory traj = integrate(entry.spec, oracle::vec2(0.0, s), s, h, 200);
    auto sol = solve_homogeneous_tangent(entry.spec, traj, 0, 200, Vec::Ones(2));
    CHECK(sol.at(200)[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-8));
    CHECK(sol.at(200)[1] == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
}

TEST_CASE("forced scalar tangent equation matches its closed form") {
    SystemSpec spec = scalar_decay();
    Trajectory traj = integrate(spec, Vec::Ones(1), 0.0, 0.01, 100);
    std::vector<Vec> forcing(101, Vec::Ones(1));
    auto sol = solve_inhomogeneous_tangent(spec, traj, 0, 100, Vec::Zero(1), forcing);
    // dv/dt = -v + 1, v(0) = 0  =>  v(t) = 1 - exp(-t)
    for (int i = 0; i <= 100; i += 10) {
        double t = 0.01 * i;
        CHECK(sol.at(i)[0] == doctest::Approx(1.0 - std::exp(-t)).epsilon(1e-8));
    }
}

TEST_CASE("forced map recursion matches the geometric series") {
    MapSpec spec = halving_map();
    Trajectory traj = iterate(spec, Vec::Ones(1), 0.0, 20);
    std::vector<Vec> forcing(20, Vec::Ones(1));
    auto sol = solve_inhomogeneous_tangent(spec, traj, 0, 20, Vec::Zero(1), forcing);
    // v_{n+1} = v_n / 2 + 1, v_0 = 0  =>  v_n = 2 - 2^{1-n}; dyadic, so exact
    for (int n = 0; n <= 20; ++n)
        CHECK(sol.at(n)[0] == doctest::Approx(2.0 - std::pow(2.0, 1 - n)).epsilon(1e-14));
}

TEST_CASE("map propagation applies exact integer matrix powers") {
    oracle::CatMap cm;
    const auto& entry = map_registry("catmap");
    Trajectory traj = iterate(entry.spec, oracle::vec2(0.2, 0.3), 0.0, 30);

    SUBCASE("forward powers are exact") {
        Vec e1 = oracle::vec2(1, 0);
        for (int n : {1, 5, 17, 30}) {
            Vec got = propagate(entry.spec, traj, 0, n, e1);
            Vec want = cm.power(n) * e1;
            CHECK((got - want).norm() == 0.0);
        }
    }
    SUBCASE("degenerate span returns the input") {
        Vec w = oracle::vec2(0.3, -0.4);
        CHECK((propagate(entry.spec, traj, 7, 7, w) - w).norm() == 0.0);
    }
    SUBCASE("backward solve inverts the forward step") {
        // Roundoff grows with the squared expansion factor over the span,
        // so keep the span short enough that the bound stays meaningful.
        Vec w = oracle::vec2(0.3, -0.4);
        Vec round = propagate(entry.spec, traj, 6, 0, propagate(entry.spec, traj, 0, 6, w));
        CHECK((round - w).norm() <= 1e-9);
    }
}

TEST_CASE("flow propagation round trip converges at integrator order") {
    const auto& entry = flow_registry("lorenz63");
    Vec u0 = spinup(entry.spec, entry.defaults.u0, 28.0, 100.0, 0.005);
    Vec w = oracle::vec3(0.6, -0.3, 0.9);
    auto round_err = [&](double h) {
        int n = static_cast<int>(std::lround(0.5 / h));
        Trajectory traj = integrate(entry.spec, u0, 28.0, h, n);
        Vec round = propagate(entry.spec, traj, n, 0, propagate(entry.spec, traj, 0, n, w));
        return (round - w).norm() / w.norm();
    };
    double coarse = round_err(0.01), fine = round_err(0.005);
    CHECK(coarse <= 1e-3);
    CHECK(fine <= 1e-4);
    CHECK(coarse / fine >= 12.0); // at least fourth-order shrinkage
    CHECK(coarse / fine <= 60.0);
}

TEST_CASE("tangent overflow raises an error instead of returning inf") {
    const auto& entry = map_registry("catmap");
    Trajectory traj = iterate(entry.spec, oracle::vec2(0.2, 0.3), 0.0, 700);
    oracle::CatMap cm;
    CHECK_THROWS_AS(solve_homogeneous_tangent(entry.spec, traj, 0, 700, Vec(cm.e_u)),
                    GrowthOverflowError);
}

TEST_CASE("cat map covariant directions match the eigen decomposition") {
    oracle::CatMap cm;
    const auto& entry = map_registry("catmap");
    Trajectory traj = iterate(entry.spec, oracle::vec2(0.2, 0.3), 0.0, 2000);
    ClvBasis clv = compute_clvs(entry.spec, traj);

    CHECK(clv.exponents[0] == doctest::Approx(cm.exponent).epsilon(1e-11));
    CHECK(clv.exponents[1] == doctest::Approx(-cm.exponent).epsilon(1e-11));
    CHECK(clv.n_unstable == 1);
    CHECK(!clv.neutral_index.has_value());
    CHECK(!clv.has_zero_exponent);
    CHECK(clv.min_angle > 1.5); // eigenvectors of a symmetric matrix: right angle

    for (int k = 0; k < clv.points(); k += clv.points() / 7 + 1) {
        CHECK(std::abs(clv.frames[k].col(0).dot(cm.e_u)) ==
              doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(clv.frames[k].col(1).dot(cm.e_s)) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("growth factors factor the tangent map exactly") {
        // Phi Z_k = Z_{k+1} diag(growth) holds by construction of the backward pass.
        for (int k = 0; k + 1 < clv.points(); k += 97) {
            Mat phi = tangent_step_matrix(entry.spec, traj, clv.traj_index(k));
            for (int j = 0; j < 2; ++j) {
                Vec lhs = phi * clv.frames[k].col(j);
                Vec rhs = clv.growth_factor(j, k) * clv.frames[k + 1].col(j);
                CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
            }
        }
    }
}

TEST_CASE("linear saddle covariant directions are the coordinate axes") {
    const auto& entry = flow_registry("linear-saddle");
    const double s = 1.5, h = 0.005;
    // Exponent gap is 3, so the backward pass converges like exp(-3t) and the
    // trimmed transient has to be several time units deep to hit 1e-7.
    Trajectory traj = integrate(entry.spec, oracle::vec2(0.01, 1.0), s, h, 3000);
    ClvOptions opts;
    opts.transient_fraction = 0.4;
    ClvBasis clv = compute_clvs(entry.spec, traj, opts);

    CHECK(clv.exponents[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(clv.exponents[1] == doctest::Approx(-2.0).epsilon(1e-8));
    REQUIRE(clv.neutral_index.has_value());
    CHECK(*clv.neutral_index == 0); // nearest zero; no true neutral direction here
    CHECK(!clv.has_zero_exponent);
    CHECK(clv.n_unstable == 0);
    for (int k = 0; k < clv.points(); k += 20) {
        CHECK(std::abs(clv.frames[k].col(0)[0]) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(std::abs(clv.frames[k].col(1)[1]) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("lorenz covariant exponents agree with an independent reference") {
    const auto& entry = flow_registry("lorenz63");
    const double h = 0.005, T = 1000.0;
    Vec u0 = spinup(entry.spec, entry.defaults.u0, 28.0, 100.0, h);
    Trajectory traj = integrate(entry.spec, u0, 28.0, h, static_cast<int>(T / h));
    ClvBasis clv = compute_clvs(entry.spec, traj);

    Vec ref = oracle::benettin_exponents_flow(entry.spec, u0, 28.0, h,
                                              static_cast<int>(T / h));
    for (int j = 0; j < 3; ++j)
        CHECK(std::abs(clv.exponents[j] - ref[j]) <= 0.03);

    // Volume contraction rate of this flow is constant: -(10 + 1 + 8/3).
    CHECK(clv.exponents.sum() == doctest::Approx(-41.0 / 3.0).epsilon(5e-3));
    CHECK(clv.n_unstable == 1);
    REQUIRE(clv.neutral_index.has_value());
    CHECK(*clv.neutral_index == 1);
    CHECK(clv.has_zero_exponent);
    CHECK(std::abs(clv.exponents[1]) <= 0.01);
    CHECK(clv.min_angle > 0.01);
}

TEST_CASE("covariant exponents are insensitive to shifting the window") {
    const auto& entry = flow_registry("lorenz63");
    const double h = 0.005;
    const int n = static_cast<int>(2000.0 / h);
    Vec u0 = spinup(entry.spec, entry.defaults.u0, 28.0, 100.0, h);
    Trajectory a = integrate(entry.spec, u0, 28.0, h, n);
    Trajectory b = integrate(entry.spec, a.states[n / 4], 28.0, h, n);
    ClvBasis ca = compute_clvs(entry.spec, a);
    ClvBasis cb = compute_clvs(entry.spec, b);
    for (int j = 0; j < 3; ++j)
        CHECK(std::abs(ca.exponents[j] - cb.exponents[j]) <= 0.02);
}

TEST_CASE("covariant basis save and load round trip") {
    const auto& entry = map_registry("catmap");
    Trajectory traj = iterate(entry.spec, oracle::vec2(0.2, 0.3), 0.05, 500);
    ClvBasis clv = compute_clvs(entry.spec, traj);
    clv.save("test_clv_roundtrip");
    ClvBasis back = ClvBasis::load("test_clv_roundtrip");
    CHECK(back.stride == clv.stride);
    CHECK(back.first_step == clv.first_step);
    CHECK(back.grid_dt == clv.grid_dt);
    CHECK(back.points() == clv.points());
    CHECK((back.exponents - clv.exponents).norm() == 0.0);
    CHECK(back.n_unstable == clv.n_unstable);
    CHECK(back.has_zero_exponent == clv.has_zero_exponent);
    for (int k = 0; k < clv.points(); k += 100)
        CHECK((back.frames[k] - clv.frames[k]).norm() == 0.0);
    std::remove("test_clv_roundtrip.meta.json");
    std::remove("test_clv_roundtrip.frames.bin");
}

TEST_CASE("oblique projections behave like projections") {
    oracle::CatMap cm;
    const auto& entry = map_registry("catmap");
    Trajectory traj = iterate(entry.spec, oracle::vec2(0.2, 0.3), 0.0, 1000);
    ClvBasis clv = compute_clvs(entry.spec, traj);
    std::mt19937_64 rng(7);

    SUBCASE("expanding and contracting parts sum to the identity") {
        for (int k = 0; k < clv.points(); k += 61) {
            Vec v = oracle::random_unit(rng, 2);
            Vec sum = project(clv, k, Pick::plus(), v) + project(clv, k, Pick::minus(), v);
            CHECK((sum - v).norm() <= 1e-12);
        }
    }
    SUBCASE("projections are idempotent") {
        Vec v = oracle::random_unit(rng, 2);
        Vec p = project(clv, 3, Pick::plus(), v);
        CHECK((project(clv, 3, Pick::plus(), p) - p).norm() <= 1e-12);
        Vec q = project(clv, 3, Pick::minus(), v);
        CHECK((project(clv, 3, Pick::minus(), q) - q).norm() <= 1e-12);
    }
    SUBCASE("cat map expanding projector matches the spectral projector") {
        for (int k = 0; k < clv.points(); k += 103) {
            Vec v = oracle::random_unit(rng, 2);
            CHECK((project(clv, k, Pick::plus(), v) - cm.Pu * v).norm() <= 1e-10);
            CHECK((project(clv, k, Pick::minus(), v) - cm.Ps * v).norm() <= 1e-10);
        }
    }
    SUBCASE("projection commutes with one-step propagation") {
        for (int k = 0; k + 1 < clv.points(); k += 149) {
            Vec v = oracle::random_unit(rng, 2);
            int i0 = clv.traj_index(k), i1 = clv.traj_index(k + 1);
            Vec a = propagate(entry.spec, traj, i0, i1, project(clv, k, Pick::plus(), v));
            Vec b = project(clv, k + 1, Pick::plus(), propagate(entry.spec, traj, i0, i1, v));
            CHECK((a - b).norm() <= 1e-10 * std::max(1.0, b.norm()));
        }
    }
    SUBCASE("projection norm respects the separation angle") {
        double bound = 1.0 / std::sin(clv.min_angle);
        for (int k = 0; k < clv.points(); k += 83) {
            Vec v = oracle::random_unit(rng, 2);
            CHECK(project(clv, k, Pick::single(0), v).norm() <= bound * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("flow projection partition includes the neutral direction") {
    const auto& entry = flow_registry("lorenz63");
    Trajectory traj = lorenz_orbit(200.0, 0.005);
    ClvBasis clv = compute_clvs(entry.spec, traj);
    REQUIRE(clv.has_zero_exponent);
    std::mt19937_64 rng(23);
    for (int k = 0; k < clv.points(); k += 997) {
        Vec v = oracle::random_unit(rng, 3);
        Vec sum = project(clv, k, Pick::plus(), v) + project(clv, k, Pick::minus(), v) +
                  project(clv, k, Pick::zero(), v);
        CHECK((sum - v).norm() <= 1e-8);
        Vec pm = project(clv, k, Pick::plus_minus(), v);
        Vec pm2 = project(clv, k, Pick::plus(), v) + project(clv, k, Pick::minus(), v);
        CHECK((pm - pm2).norm() <= 1e-10);
    }
    SUBCASE("picked index sets partition the directions") {
        auto plus = clv.picked(Pick::plus());
        auto minus = clv.picked(Pick::minus());
        auto zero = clv.picked(Pick::zero());
        CHECK(plus.size() + minus.size() + zero.size() == 3);
        CHECK(zero.size() == 1);
        CHECK(zero[0] == *clv.neutral_index);
    }
}
