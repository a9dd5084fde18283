#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "riskmin/rng.hpp"
#include "riskmin/tensor.hpp"

namespace riskmin::dist {

using num::Tensor;

// Nonnegative components summing to 1 within 1e-12. Argmax ties break to the
// lowest index everywhere in the library.
class SimplexVec {
public:
    explicit SimplexVec(std::vector<double> p);
    static SimplexVec unchecked(std::vector<double> p);  // for exact constructions

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    const std::vector<double>& values() const { return p_; }
    std::size_t argmax() const;
    double entropy() const;  // -sum p log p with 0 log 0 = 0

private:
    SimplexVec() = default;
    std::vector<double> p_;
};

double total_variation(const SimplexVec& a, const SimplexVec& b);

// Exact finite joint p(y_i, x_j). The brute-force ground truth behind every
// theorem check: conditionals, marginals and expectations are all enumerable.
class DiscreteJoint {
public:
    DiscreteJoint(std::vector<Tensor> y_support, std::vector<Tensor> x_support, Tensor prob);

    std::size_t ny() const { return y_support_.size(); }
    std::size_t nx() const { return x_support_.size(); }
    const Tensor& y(std::size_t i) const { return y_support_[i]; }
    const Tensor& x(std::size_t j) const { return x_support_[j]; }
    const std::vector<Tensor>& y_support() const { return y_support_; }
    const std::vector<Tensor>& x_support() const { return x_support_; }
    double prob(std::size_t i, std::size_t j) const { return prob_.at2(i, j); }
    double y_marginal(std::size_t i) const { return y_marginal_[i]; }

    SimplexVec conditional(std::size_t y_index) const;
    std::vector<std::pair<std::size_t, std::size_t>> sample(RngStream& rng, std::size_t n) const;

    // Random joint with cell masses bounded away from zero, so every marginal
    // and conditional stays well conditioned for tight-tolerance checks.
    static DiscreteJoint random(RngStream& rng, std::size_t ny, std::size_t nx,
                                std::size_t x_dim = 1);
    // x-support = one-hot class vectors; conditionals are the q_y of the
    // noisy-label analysis.
    static DiscreteJoint random_onehot(RngStream& rng, std::size_t ny, std::size_t n_classes);

private:
    std::vector<Tensor> y_support_;
    std::vector<Tensor> x_support_;
    Tensor prob_;
    std::vector<double> y_marginal_;
};

// Mixture of isotropic Gaussians; closed-form density, score and posterior
// mean under additive Gaussian corruption.
class GaussianMixture {
public:
    struct Component {
        double weight;
        Tensor mean;
        double var;  // isotropic sigma^2
    };

    GaussianMixture(std::size_t dim, std::vector<Component> comps);

    std::size_t dim() const { return dim_; }
    const std::vector<Component>& components() const { return comps_; }

    double log_density(const Tensor& y) const;
    Tensor score(const Tensor& y) const;  // grad_y log p(y)

    // Marginal of y = x + n, n ~ N(0, sigma2 I): same means, vars + sigma2.
    GaussianMixture widened(double sigma2) const;
    // E[x | y] for x ~ this mixture, y = x + N(0, sigma2 I).
    Tensor posterior_mean(const Tensor& y, double sigma2) const;

    Tensor sample(RngStream& rng) const;

    // Scalar-only helpers used by evaluation grids.
    double cdf(double y) const;
    double quantile(double p) const;
    double mean1() const;
    double variance1() const;

    static GaussianMixture random(RngStream& rng, std::size_t n_components, double mean_span,
                                  double var_lo, double var_hi);

private:
    std::size_t dim_;
    std::vector<Component> comps_;
    std::vector<double> responsibilities(const Tensor& y) const;
};

// Gaussian prior + linear observation y = A x (+ N(0, sigma_obs^2 I)); the
// closed-form stand-in for the super-resolution posterior. sigma_obs = 0 with
// singular A S A^T is handled by a tolerance-1e-10 pseudo-inverse.
class GaussianLinearModel {
public:
    GaussianLinearModel(Tensor mu0, Tensor sigma0, Tensor a, double sigma_obs2);

    struct Posterior {
        Tensor mean;       // d
        Tensor cov;        // d x d
        Tensor pixel_var;  // diagonal of cov
        double condition;  // of A S0 A^T + sigma_obs^2 I (nonzero part)
    };

    Posterior posterior(const Tensor& y) const;
    std::pair<Tensor, Tensor> mc_stats(const Tensor& y, std::size_t n_samples,
                                       RngStream& rng) const;  // mean, 1/n variance

    Tensor sample_prior(RngStream& rng) const;
    Tensor sample_posterior(const Tensor& y, RngStream& rng) const;
    Tensor observe(const Tensor& x, RngStream& rng) const;  // A x + noise

    std::size_t xdim() const { return d_; }
    std::size_t ydim() const { return m_; }
    const Tensor& operator_matrix() const { return a_; }
    const Tensor& prior_mean() const { return mu0_; }
    const Tensor& prior_cov() const { return sigma0_; }
    double obs_var() const { return sigma_obs2_; }

    // m-block averaging downsampler (each y component = mean of a block of x),
    // with a seeded random SPD prior covariance.
    static GaussianLinearModel block_average(std::size_t d, std::size_t m, double sigma_obs2,
                                             RngStream& rng);

private:
    std::size_t d_, m_;
    Tensor mu0_, sigma0_, a_;
    double sigma_obs2_;
    // Precomputed factors (posterior gain, covariance, sampling factor).
    Tensor gain_;        // d x m
    Tensor post_cov_;    // d x d
    Tensor post_factor_; // d x d, post_cov = F F^T
    Tensor prior_factor_;
    double condition_ = 0.0;
    void precompute();
};

struct NoisePair {
    Tensor clean;         // s
    Tensor noisy_input;   // y = s + n1
    Tensor noisy_target;  // x = s + n2
    double sigma1, sigma2;
};

// n1 and n2 come from separate streams derived from (seed, tag, index); the
// Gaussian draws make E[n2] = 0 by construction.
std::vector<NoisePair> make_noise2noise_pairs(
    const std::function<Tensor(RngStream&)>& prior_sampler, std::size_t dim, double sigma1,
    double sigma2, std::uint64_t seed, std::size_t n);

}  // namespace riskmin::dist
