#include "crepe/core/errors.hpp"
#include "crepe/core/rng.hpp"
#include "crepe/gaussian/reference.hpp"
#include "crepe/gaussian/sde.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace crepe;
using namespace crepe::gaussian;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

SdeProcess zero_proc(NoiseSchedule n, Direction d) {
    return {[](const Vec& x, double) { return Vec::Zero(x.size()); }, n, d};
}

// Independent isotropic Gaussian log-density via an explicit quadratic form.
double quad_form_log_density(const Vec& x, const Vec& mean, double var) {
    const Eigen::MatrixXd cov = var * Eigen::MatrixXd::Identity(x.size(), x.size());
    const Vec d = x - mean;
    const double maha = d.transpose() * cov.inverse() * d;
    return -0.5 * maha - 0.5 * std::log((2.0 * std::numbers::pi * cov).determinant());
}

PathSegment<Vec> random_path(int dim, std::vector<double> times, std::uint64_t seed) {
    RngStream r(seed, {0, 0, Purpose::test});
    PathSegment<Vec> p;
    p.times = std::move(times);
    Vec x(dim);
    for (std::size_t k = 0; k < p.times.size(); ++k) {
        r.fill_normal(x);
        p.states.push_back(x);
    }
    return p;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> t(n + 1);
    for (int i = 0; i <= n; ++i) t[i] = a + (b - a) * i / n;
    return t;
}

// Mean |log R^Gamma + log gamma_t' - log gamma_t| over sampled exact reference paths.
double reference_identity_error(const ReferenceProcess& ref, double t0, double t1, double dt, int paths,
                                std::uint64_t seed) {
    const int n = static_cast<int>(std::lround((t1 - t0) / dt));
    const auto times = linspace(t0, t1, n);
    const auto fwd = ref.forward_process();
    const auto bwd = ref.backward_process();
    double acc = 0.0;
    for (int p = 0; p < paths; ++p) {
        RngStream r(seed, {1, static_cast<std::uint64_t>(p), Purpose::test});
        const auto [m, v] = ref.moments(t0);
        PathSegment<Vec> path;
        path.times = times;
        Vec x = m + std::sqrt(v) * v1(r.normal());
        path.states.push_back(x);
        for (int k = 1; k <= n; ++k) {
            x = em_step(x, times[k - 1], times[k] - times[k - 1], fwd, r);
            path.states.push_back(x);
        }
        const double lr = rne_discrete(path, fwd, bwd).value;
        acc += std::abs(lr + ref.log_density(path.states.back(), t1) - ref.log_density(path.states.front(), t0));
    }
    return acc / paths;
}

}  // namespace

TEST_CASE("em_step formulas") {
    const auto sched1 = NoiseSchedule::constant(1.0);
    CHECK(em_step(v1(0.0), 0.0, 0.01, zero_proc(sched1, Direction::forward), v1(0.0))[0] == 0.0);
    SdeProcess decay{[](const Vec& x, double) { return Vec(-x); }, NoiseSchedule::constant(0.0), Direction::forward};
    CHECK(em_step(v1(1.0), 0.0, 0.1, decay, v1(0.3))[0] == doctest::Approx(0.9));
    CHECK(em_step(v1(1.0), 1.0, 0.25, zero_proc(NoiseSchedule::constant(2.0), Direction::backward), v1(1.0))[0] ==
          doctest::Approx(2.0));
    SdeProcess push{[](const Vec& x, double) { return Vec::Constant(x.size(), 3.0); }, NoiseSchedule::constant(0.0),
                    Direction::backward};
    CHECK(em_step(v1(1.0), 1.0, 0.1, push, v1(0.0))[0] == doctest::Approx(0.7));
}

TEST_CASE("em_step rejects bad input") {
    const auto p = zero_proc(NoiseSchedule::constant(1.0), Direction::forward);
    CHECK_THROWS_AS(em_step(v1(NAN), 0.0, 0.1, p, v1(0.0)), NumericalError);
    CHECK_THROWS_AS(em_step(v1(0.0), 0.0, 0.0, p, v1(0.0)), ConfigError);
}

TEST_CASE("log_kernel values") {
    // sigma^2 dt = 1 at the mode
    const auto p = zero_proc(NoiseSchedule::constant(10.0), Direction::forward);
    CHECK(log_kernel(v1(0.3), v1(0.3), 0.0, 0.01, p) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
    const auto q = zero_proc(NoiseSchedule::edm(), Direction::forward);
    CHECK(log_kernel(v1(0.3), v1(-1.1), 0.5, 0.01, q) == doctest::Approx(log_kernel(v1(-1.1), v1(0.3), 0.5, 0.01, q)));
    SdeProcess decay{[](const Vec& x, double) { return Vec(-x); }, NoiseSchedule::constant(1.0), Direction::forward};
    Vec a(2), b(2);
    a << 0.4, -0.2;
    b << 1.0, 0.5;
    const double dt = 0.1;
    CHECK(log_kernel(a, b, 0.0, dt, decay) == doctest::Approx(quad_form_log_density(a, b - dt * b, dt)).epsilon(1e-12));
    SdeProcess back{[](const Vec& x, double) { return Vec(-x); }, NoiseSchedule::constant(1.0), Direction::backward};
    CHECK(log_kernel(a, b, 0.0, dt, back) == doctest::Approx(quad_form_log_density(a, b + dt * b, dt)).epsilon(1e-12));
    CHECK_THROWS_AS(log_kernel(a, b, 0.0, dt, zero_proc(NoiseSchedule::constant(0.0), Direction::forward)),
                    NumericalError);
}

TEST_CASE("rne_discrete trivial cases") {
    const auto n = NoiseSchedule::constant(1.3);
    PathSegment<Vec> single{{0.5}, {v1(1.0)}, Direction::forward};
    CHECK(rne_discrete(single, zero_proc(n, Direction::forward), zero_proc(n, Direction::backward)).value == 0.0);
    const auto path = random_path(3, linspace(0.1, 0.6, 7), 3);
    CHECK(rne_discrete(path, zero_proc(n, Direction::forward), zero_proc(n, Direction::backward)).value ==
          doctest::Approx(0.0).epsilon(1e-12));
    PathSegment<Vec> bad{{0.0, 1.0}, {v1(0.0)}, Direction::forward};
    CHECK_THROWS_AS(rne_discrete(bad, zero_proc(n, Direction::forward), zero_proc(n, Direction::backward)), ConfigError);
}

TEST_CASE("rne_discrete against an explicit kernel product") {
    const auto n = NoiseSchedule::edm();
    SdeProcess f{[](const Vec& x, double t) { return Vec(-0.3 * t * x); }, n, Direction::forward};
    SdeProcess b{[](const Vec& x, double t) { return Vec(x.array().sin() * (1.0 + t)); }, n, Direction::backward};
    const auto path = random_path(2, linspace(0.2, 0.5, 6), 11);
    double expected = 0.0;
    for (std::size_t k = 1; k < path.times.size(); ++k) {
        const double s0 = path.times[k - 1], s1 = path.times[k], dt = s1 - s0;
        const Vec& xa = path.states[k - 1];
        const Vec& xb = path.states[k];
        expected += quad_form_log_density(xa, xb - dt * b.drift(xb, s1), 2.0 * s1 * dt);
        expected -= quad_form_log_density(xb, xa + dt * f.drift(xa, s0), 2.0 * s0 * dt);
    }
    CHECK(rne_discrete(path, f, b).value == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("rne_discrete telescopes over a shared path") {
    const auto n = NoiseSchedule::edm();
    SdeProcess f{[](const Vec& x, double) { return Vec(-0.5 * x); }, n, Direction::forward};
    SdeProcess b{[](const Vec& x, double t) { return Vec(x.array().cos() * t); }, n, Direction::backward};
    const auto path = random_path(2, linspace(0.1, 0.9, 8), 5);
    PathSegment<Vec> left, right;
    for (int k = 0; k <= 4; ++k) left.times.push_back(path.times[k]), left.states.push_back(path.states[k]);
    for (int k = 4; k <= 8; ++k) right.times.push_back(path.times[k]), right.states.push_back(path.states[k]);
    const double whole = rne_discrete(path, f, b).value;
    CHECK(std::abs(whole - rne_discrete(left, f, b).value - rne_discrete(right, f, b).value) < 8e-12);
}

TEST_CASE("rne_path_integral trivial cases") {
    const auto n = NoiseSchedule::constant(1.0);
    const auto path = random_path(2, linspace(0.0, 1.0, 10), 8);
    auto zero = [](const Vec& x, double) { return Vec::Zero(x.size()); };
    CHECK(rne_path_integral(path, zero, zero, n).value == 0.0);
    auto c = [](const Vec& x, double) { return Vec::Constant(x.size(), 0.7); };
    CHECK(rne_path_integral(path, c, c, n).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("path integral and kernel product agree to first order") {
    const auto n = NoiseSchedule::constant(1.0);
    auto mu = [](const Vec& x, double) { return Vec(x.array().sin()); };
    auto nu = [](const Vec& x, double) { return Vec(0.5 * x.array().cos()); };
    SdeProcess f{mu, n, Direction::forward}, b{nu, n, Direction::backward};
    std::vector<double> gaps;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        const int steps = static_cast<int>(std::lround(1.0 / dt));
        double acc = 0.0;
        const int paths = 2000;
        for (int p = 0; p < paths; ++p) {
            RngStream r(17, {static_cast<std::uint32_t>(steps), static_cast<std::uint64_t>(p), Purpose::test});
            PathSegment<Vec> path;
            path.times = linspace(0.0, 1.0, steps);
            Vec x = v1(r.normal());
            path.states.push_back(x);
            for (int k = 1; k <= steps; ++k) {
                x = em_step(x, path.times[k - 1], dt, f, r);
                path.states.push_back(x);
            }
            acc += std::abs(rne_path_integral(path, mu, nu, n).value - rne_discrete(path, f, b).value);
        }
        gaps.push_back(acc / paths);
    }
    for (std::size_t i = 1; i < gaps.size(); ++i) {
        const double ratio = gaps[i - 1] / gaps[i];
        CHECK(ratio >= 1.5);
        CHECK(ratio <= 2.5);
    }
}

TEST_CASE("reference propagation") {
    ReferenceProcess ref{v1(0.5), 1.0, 0.0, NoiseSchedule::edm(), {}};
    auto [m, v] = ref.moments(1.0);
    CHECK(v == doctest::Approx(2.0));
    CHECK(m[0] == 0.5);
    ReferenceProcess ou{v1(3.0), 0.0, 0.0, NoiseSchedule::constant(std::sqrt(2.0)), {DriftSpec::Kind::linear, 1.0}};
    auto [m1, v1_] = ou.moments(1.0);
    CHECK(v1_ == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));
    CHECK(m1[0] == doctest::Approx(3.0 * std::exp(-1.0)));
    CHECK(ou.moments(40.0).second == doctest::Approx(1.0));
    ReferenceProcess ou_edm{v1(0.0), 0.5, 0.0, NoiseSchedule::edm(), {DriftSpec::Kind::linear, 0.5}};
    // dv/dt = -v + 2t  =>  v(t) = 2(t - 1) + (v0 + 2) e^{-t}
    CHECK(ou_edm.moments(1.5).second == doctest::Approx(2.0 * 0.5 + 2.5 * std::exp(-1.5)).epsilon(1e-10));
    CHECK_THROWS_AS(propagate_reference(ref, {DriftSpec::Kind::general, 0.0}, 1.0), ConfigError);
}

TEST_CASE("stabilized rne with the reference's own pair") {
    ReferenceProcess ref{v1(0.2), 0.7, 0.0, NoiseSchedule::edm(), {}};
    const auto path = random_path(1, linspace(0.3, 0.8, 5), 21);
    const double got = rne_stabilized(path, ref.forward_process(), ref.backward_process(), ref).value;
    const double expected = ref.log_density(path.states.front(), 0.3) - ref.log_density(path.states.back(), 0.8);
    CHECK(got == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("stabilized rne differs from the plain product by the reference's own estimator error") {
    for (int dim = 1; dim <= 4; ++dim) {
        Vec mean = Vec::LinSpaced(dim, -0.5, 0.5);
        ReferenceProcess ref{mean, 1.3, 0.0, NoiseSchedule::edm(), {}};
        SdeProcess f{[](const Vec& x, double) { return Vec::Zero(x.size()); }, ref.noise, Direction::forward};
        SdeProcess b{[](const Vec& x, double t) { return Vec(-2.0 * t * (x.array().tanh())); }, ref.noise,
                     Direction::backward};
        const auto path = random_path(dim, linspace(0.5, 0.6, 10), 30 + dim);
        const double stab = rne_stabilized(path, f, b, ref).value;
        const double plain = rne_discrete(path, f, b).value;
        const double gamma_rne = rne_discrete(path, ref.forward_process(), ref.backward_process()).value;
        const double gamma_err = gamma_rne + ref.log_density(path.states.back(), 0.6) -
                                 ref.log_density(path.states.front(), 0.5);
        CHECK(std::abs((stab - plain) + gamma_err) < 1e-9);
    }
}

TEST_CASE("stabilized rne rejects a degenerate reference kernel") {
    ReferenceProcess ref{v1(0.0), 1.0, 0.0, NoiseSchedule::constant(0.0), {}};
    const auto path = random_path(1, linspace(0.3, 0.8, 5), 2);
    const auto p = zero_proc(NoiseSchedule::constant(1.0), Direction::forward);
    const auto q = zero_proc(NoiseSchedule::constant(1.0), Direction::backward);
    CHECK_THROWS_AS(rne_stabilized(path, p, q, ref), Error);
}

TEST_CASE("reference identity converges with dt") {
    ReferenceProcess edm{v1(0.0), 0.5, 0.0, NoiseSchedule::edm(), {}};
    ReferenceProcess flat{v1(0.0), 0.5, 0.0, NoiseSchedule::constant(1.0), {}};
    for (const auto* ref : {&edm, &flat}) {
        const double e2 = reference_identity_error(*ref, 0.1, 1.0, 2e-3, 4000, 9);
        const double e1 = reference_identity_error(*ref, 0.1, 1.0, 1e-3, 4000, 9);
        MESSAGE("kind " << static_cast<int>(ref->noise.kind) << " error ratio " << e2 / e1 << " (" << e2 << " -> " << e1 << ")");
        CHECK(e1 < e2);
    }
}
