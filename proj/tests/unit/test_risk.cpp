#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "riskmin/distributions.hpp"
#include "riskmin/error.hpp"
#include "riskmin/risk.hpp"

using namespace riskmin;
using namespace riskmin::risk;
using dist::DiscreteJoint;
using dist::GaussianLinearModel;
using dist::SimplexVec;
using num::Tensor;

namespace {
const LossFn kL2{LossKind::L2};
const LossFn kCE{LossKind::CrossEntropy};
}  // namespace

TEST_CASE("loss evaluation") {
    SUBCASE("l2 of equal arguments is zero") {
        Tensor a = Tensor::vec({0.3, -0.8});
        CHECK(kL2.eval(a, a).value == 0.0);
    }
    SUBCASE("ce of the uniform pair is ln 2") {
        Tensor u = Tensor::vec({0.5, 0.5});
        CHECK(kCE.eval(u, u).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("ce against sampled one-hots averages to the entropy") {
        // Enumeration oracle: sum_i q_i * CE(q, onehot_i) = -sum q_i log q_i.
        Tensor q = Tensor::vec({0.2, 0.3, 0.5});
        double avg = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            Tensor onehot({3});
            onehot.at(i) = 1.0;
            avg += q.at(i) * kCE.eval(q, onehot).value;
        }
        double entropy = 0.0;
        for (std::size_t i = 0; i < 3; ++i) entropy -= q.at(i) * std::log(q.at(i));
        CHECK(avg == doctest::Approx(entropy).epsilon(1e-12));
    }
    SUBCASE("ce out of the simplex is the tagged infinity") {
        CHECK(kCE.eval(Tensor::vec({0.7, 0.7}), Tensor::vec({0.5, 0.5})).infinite);
        CHECK(kCE.eval(Tensor::vec({1.0, 0.0}), Tensor::vec({0.0, 1.0})).infinite);  // log 0
        CHECK_FALSE(kCE.eval(Tensor::vec({1.0, 0.0}), Tensor::vec({1.0, 0.0})).infinite);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(kL2.eval(Tensor::vec({1.0}), Tensor::vec({1.0, 2.0})), Error);
    }
}

TEST_CASE("conditional risk") {
    SUBCASE("bernoulli variance") {
        SimplexVec cond({0.5, 0.5});
        std::vector<Tensor> xs = {Tensor::vec({0.0}), Tensor::vec({1.0})};
        LossValue r = conditional_risk(kL2, Tensor::vec({0.5}), cond, xs, LabelMap::identity_x(),
                                       Tensor::vec({0.0}));
        CHECK(r.value == doctest::Approx(0.25).epsilon(1e-15));
    }
    SUBCASE("ce risk at z = q is the entropy") {
        SimplexVec cond({0.2, 0.8});
        std::vector<Tensor> xs = {Tensor::vec({1.0, 0.0}), Tensor::vec({0.0, 1.0})};
        LossValue r = conditional_risk(kCE, Tensor::vec({0.2, 0.8}), cond, xs,
                                       LabelMap::identity_x(), Tensor::vec({0.0}));
        CHECK(r.value == doctest::Approx(cond.entropy()).epsilon(1e-12));
    }
    SUBCASE("matches an independent double loop") {
        RngStream rng(40, "risk");
        DiscreteJoint joint = DiscreteJoint::random(rng, 4, 6, 2);
        const LabelMap g = LabelMap::identity_x();
        for (std::size_t i = 0; i < joint.ny(); ++i) {
            SimplexVec cond = joint.conditional(i);
            Tensor z({2});
            z.at(0) = rng.next_range(-1.0, 1.0);
            z.at(1) = rng.next_range(-1.0, 1.0);
            double naive = 0.0;
            for (std::size_t j = 0; j < joint.nx(); ++j) {
                double sq = 0.0;
                for (std::size_t k = 0; k < 2; ++k) {
                    const double d = z.at(k) - joint.x(j).at(k);
                    sq += d * d;
                }
                naive += cond[j] * sq;
            }
            LossValue r = conditional_risk(kL2, z, cond, joint.x_support(), g, joint.y(i));
            CHECK(r.value == doctest::Approx(naive).epsilon(1e-13));
        }
    }
}

TEST_CASE("closed-form minimizers") {
    SUBCASE("l2 gives the conditional mean") {
        SimplexVec cond({0.3, 0.7});
        std::vector<Tensor> xs = {Tensor::vec({0.0}), Tensor::vec({1.0})};
        Tensor z = zstar_closed_form(kL2, cond, xs, LabelMap::identity_x(), Tensor::vec({0.0}));
        CHECK(z.at(0) == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("ce gives q_y") {
        SimplexVec cond({0.7, 0.3});
        std::vector<Tensor> xs = {Tensor::vec({1.0, 0.0}), Tensor::vec({0.0, 1.0})};
        Tensor z = zstar_closed_form(kCE, cond, xs, LabelMap::identity_x(), Tensor::vec({0.0}));
        CHECK(z.at(0) == doctest::Approx(0.7).epsilon(1e-15));
        CHECK(z.at(1) == doctest::Approx(0.3).epsilon(1e-15));
    }
    SUBCASE("squared-residual labels recover the posterior pixel variance") {
        // Gaussian-linear toy: d=2, A=[1,1], sigma_obs=0, y=2. The posterior is
        // a 1-D Gaussian along (1,-1)/sqrt(2) with unit variance around [1,1];
        // quadrature over that line discretizes the conditional x | y.
        GaussianLinearModel glm(Tensor({2}), Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}),
                                Tensor({1, 2}, {1.0, 1.0}), 0.0);
        auto post = glm.posterior(Tensor::vec({2.0}));
        const std::size_t n = 2001;
        const double span = 6.0;
        std::vector<Tensor> xs;
        std::vector<double> w(n);
        double wsum = 0.0;
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double t = -span + 2.0 * span * static_cast<double>(j) / (n - 1);
            double wt = std::exp(-0.5 * t * t);
            if (j == 0 || j + 1 == n) wt *= 0.5;  // trapezoid ends
            w[j] = wt;
            wsum += wt;
            xs.push_back(Tensor::vec({post.mean.at(0) + t * inv_sqrt2,
                                      post.mean.at(1) - t * inv_sqrt2}));
        }
        for (double& v : w) v /= wsum;
        double acc = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) acc += w[j];
        w[n - 1] = 1.0 - acc;
        SimplexVec cond(w);
        Tensor mean_copy = post.mean;
        LabelMap g = LabelMap::squared_residual([mean_copy](const Tensor&) { return mean_copy; });
        Tensor z = zstar_closed_form(kL2, cond, xs, g, Tensor::vec({2.0}));
        CHECK(z.at(0) == doctest::Approx(post.pixel_var.at(0)).epsilon(1e-6));
        CHECK(z.at(1) == doctest::Approx(post.pixel_var.at(1)).epsilon(1e-6));
    }
    SUBCASE("ce with non-identity labels is routed to brute force") {
        SimplexVec cond({1.0});
        std::vector<Tensor> xs = {Tensor::vec({0.5, 0.5})};  // not one-hot
        CHECK_THROWS_AS(
            zstar_closed_form(kCE, cond, xs, LabelMap::identity_x(), Tensor::vec({0.0})), Error);
    }
}

TEST_CASE("brute-force minimizer") {
    SUBCASE("bernoulli(0.7) on a fine grid") {
        SimplexVec cond({0.3, 0.7});
        std::vector<Tensor> xs = {Tensor::vec({0.0}), Tensor::vec({1.0})};
        GridSpec grid;
        grid.lo = {0.0};
        grid.hi = {1.0};
        grid.step = 1e-3;
        Tensor z = zstar_bruteforce(kL2, cond, xs, LabelMap::identity_x(), Tensor::vec({0.0}), grid);
        CHECK(std::abs(z.at(0) - 0.7) < 1e-3);
    }
    SUBCASE("ce lattice lands within one pitch of q") {
        SimplexVec cond({0.2, 0.3, 0.5});
        std::vector<Tensor> xs;
        for (std::size_t i = 0; i < 3; ++i) {
            Tensor x({3});
            x.at(i) = 1.0;
            xs.push_back(std::move(x));
        }
        GridSpec grid;
        Tensor z = zstar_bruteforce(kCE, cond, xs, LabelMap::identity_x(), Tensor::vec({0.0}), grid);
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(z.at(i) - cond[i]) <= 0.01 + 1e-12);
    }
    SUBCASE("deterministic mapping returns the label itself") {
        SimplexVec cond({1.0});
        std::vector<Tensor> xs = {Tensor::vec({0.42})};
        GridSpec grid;
        grid.lo = {0.0};
        grid.hi = {1.0};
        grid.step = 1e-2;
        Tensor z = zstar_bruteforce(kL2, cond, xs, LabelMap::identity_x(), Tensor::vec({0.0}), grid);
        CHECK(std::abs(z.at(0) - 0.42) < 1e-9);  // golden refinement sharpens past the grid
    }
    SUBCASE("empty grid errors") {
        SimplexVec cond({1.0});
        std::vector<Tensor> xs = {Tensor::vec({0.0})};
        CHECK_THROWS_AS(
            zstar_bruteforce(kL2, cond, xs, LabelMap::identity_x(), Tensor::vec({0.0}), GridSpec{}),
            Error);
    }
    SUBCASE("agrees with the closed form on random joints") {
        RngStream rng(55, "bf");
        DiscreteJoint joint = DiscreteJoint::random(rng, 3, 5, 1);
        GridSpec grid;
        grid.lo = {-1.5};
        grid.hi = {1.5};
        grid.step = 1e-2;
        for (std::size_t i = 0; i < joint.ny(); ++i) {
            SimplexVec cond = joint.conditional(i);
            Tensor exact =
                zstar_closed_form(kL2, cond, joint.x_support(), LabelMap::identity_x(), joint.y(i));
            Tensor bf = zstar_bruteforce(kL2, cond, joint.x_support(), LabelMap::identity_x(),
                                         joint.y(i), grid);
            CHECK(std::abs(bf.at(0) - exact.at(0)) < 1e-2);
        }
    }
}

TEST_CASE("minimizer optimality property") {
    RngStream rng(66, "opt");
    DiscreteJoint joint = DiscreteJoint::random(rng, 3, 4, 1);
    const LabelMap g = LabelMap::identity_x();
    for (std::size_t i = 0; i < joint.ny(); ++i) {
        SimplexVec cond = joint.conditional(i);
        Tensor zs = zstar_closed_form(kL2, cond, joint.x_support(), g, joint.y(i));
        const double base = conditional_risk(kL2, zs, cond, joint.x_support(), g, joint.y(i)).value;
        for (int probe = 0; probe < 1000; ++probe) {
            Tensor z({1});
            z.at(0) = rng.next_range(-2.0, 2.0);
            const double r = conditional_risk(kL2, z, cond, joint.x_support(), g, joint.y(i)).value;
            CHECK(base <= r + 1e-9);
        }
    }
    // Same property for CE around q_y.
    DiscreteJoint cj = DiscreteJoint::random_onehot(rng, 2, 3);
    for (std::size_t i = 0; i < cj.ny(); ++i) {
        SimplexVec cond = cj.conditional(i);
        Tensor q = zstar_closed_form(kCE, cond, cj.x_support(), g, cj.y(i));
        const double base = conditional_risk(kCE, q, cond, cj.x_support(), g, cj.y(i)).value;
        for (int probe = 0; probe < 1000; ++probe) {
            Tensor z = Tensor::vec(random_simplex(rng, 3).values());
            const LossValue r = conditional_risk(kCE, z, cond, cj.x_support(), g, cj.y(i));
            CHECK((r.infinite || base <= r.value + 1e-9));
        }
    }
}

TEST_CASE("constant-gap identity") {
    RngStream rng(77, "gap");
    SUBCASE("gap equals c2 - c1 for every probe") {
        for (int trial = 0; trial < 4; ++trial) {
            DiscreteJoint joint = DiscreteJoint::random(rng, 4, 5, 2);
            auto probes = random_probes(joint, LabelMap::identity_x(), 8, rng);
            GapReport rep = theorem2_gap_check(kL2, joint, LabelMap::identity_x(), probes);
            CHECK(rep.max_dev < 1e-10);
            CHECK(std::abs(rep.c_emp - rep.c_theory) < 1e-10);
        }
    }
    SUBCASE("probe at z* yields J_zstar = 0 and J_g = C") {
        DiscreteJoint joint = DiscreteJoint::random(rng, 3, 4, 1);
        std::vector<Tensor> zs;
        for (std::size_t i = 0; i < joint.ny(); ++i)
            zs.push_back(zstar_closed_form(kL2, joint.conditional(i), joint.x_support(),
                                           LabelMap::identity_x(), joint.y(i)));
        auto probes = random_probes(joint, LabelMap::identity_x(), 1, rng);
        probes.push_back(zs);
        GapReport rep = theorem2_gap_check(kL2, joint, LabelMap::identity_x(), probes);
        CHECK(std::abs(rep.j_zstar.back()) < 1e-14);
        CHECK(rep.j_g.back() == doctest::Approx(rep.c_theory).epsilon(1e-12));
    }
    SUBCASE("deterministic joints have zero gap") {
        // x = h(y): one nonzero cell per row.
        Tensor p({3, 3});
        p.at2(0, 1) = 0.25;
        p.at2(1, 0) = 0.5;
        p.at2(2, 1) = 0.25;
        std::vector<Tensor> ys, xs;
        for (std::size_t i = 0; i < 3; ++i) {
            ys.push_back(Tensor::vec({static_cast<double>(i)}));
            xs.push_back(Tensor::vec({static_cast<double>(i) - 1.0}));
        }
        DiscreteJoint joint(ys, xs, p);
        auto probes = random_probes(joint, LabelMap::identity_x(), 4, rng);
        GapReport rep = theorem2_gap_check(kL2, joint, LabelMap::identity_x(), probes);
        CHECK(std::abs(rep.c_theory) < 1e-14);
        CHECK(rep.max_dev < 1e-12);
    }
    SUBCASE("ce is rejected") {
        DiscreteJoint joint = DiscreteJoint::random_onehot(rng, 2, 3);
        auto probes = random_probes(joint, LabelMap::identity_x(), 2, rng);
        CHECK_THROWS_AS(theorem2_gap_check(kCE, joint, LabelMap::identity_x(), probes), Error);
    }
}

TEST_CASE("loss hypothesis probes") {
    RngStream rng(88, "hyp");
    SUBCASE("l2 satisfies both inequalities") {
        HypothesisReport rep = loss_hypothesis_probe(kL2, rng, 2000);
        CHECK(rep.pass());
    }
    SUBCASE("ce satisfies the Gibbs side but not the other") {
        // Gibbs: CE(a,b) >= CE(b,b) = H(b) always. The same inequality against
        // H(a) genuinely fails on simplex pairs, e.g. a=(0.9,0.1), b=(0.99,0.01):
        // CE(a,b) ~ 0.127 < H(a) ~ 0.325. The probe must find a witness.
        HypothesisReport rep = loss_hypothesis_probe(kCE, rng, 2000);
        CHECK(rep.holds_ab_ge_bb);
        CHECK_FALSE(rep.holds_ab_ge_aa);
        REQUIRE(rep.counterexample_aa.has_value());
        const auto& [a, b] = *rep.counterexample_aa;
        CHECK(kCE.eval(a, b).value < kCE.eval(a, a).value);
        // Pinned analytic witness.
        Tensor wa = Tensor::vec({0.9, 0.1});
        Tensor wb = Tensor::vec({0.99, 0.01});
        CHECK(kCE.eval(wa, wb).value < kCE.eval(wa, wa).value);
    }
    SUBCASE("a deliberately broken loss fails with a counterexample") {
        auto broken = [](const Tensor& a, const Tensor& b) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = a.at(i) - b.at(i);
                s += d * d;
            }
            return -std::sqrt(s);
        };
        HypothesisReport rep = loss_hypothesis_probe(broken, 2, rng, 500);
        CHECK_FALSE(rep.pass());
        CHECK(rep.counterexample_aa.has_value());
    }
}
