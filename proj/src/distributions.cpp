#include "riskmin/distributions.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "riskmin/error.hpp"

namespace riskmin::dist {

namespace {

constexpr double kSimplexTol = 1e-12;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::MatrixXd to_eigen(const Tensor& t, std::size_t rows, std::size_t cols) {
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = t.at(i * cols + j);
    return m;
}

Eigen::VectorXd vec_to_eigen(const Tensor& t) {
    Eigen::VectorXd v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v(i) = t.at(i);
    return v;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            t.at(static_cast<std::size_t>(i * m.cols() + j)) = m(i, j);
    return t;
}

Tensor from_eigen_vec(const Eigen::VectorXd& v) {
    Tensor t({static_cast<std::size_t>(v.size())});
    for (Eigen::Index i = 0; i < v.size(); ++i) t.at(static_cast<std::size_t>(i)) = v(i);
    return t;
}

}  // namespace

// ----------------------------------------------------------------- SimplexVec

SimplexVec::SimplexVec(std::vector<double> p) : p_(std::move(p)) {
    double sum = 0.0;
    for (double v : p_) {
        if (v < 0.0) fail(ErrorCode::Domain, "simplex: negative component " + std::to_string(v));
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
        fail(ErrorCode::Domain, "simplex: components sum to " + std::to_string(sum));
    }
}

SimplexVec SimplexVec::unchecked(std::vector<double> p) {
    SimplexVec s;
    s.p_ = std::move(p);
    return s;
}

std::size_t SimplexVec::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p_.size(); ++i)
        if (p_[i] > p_[best]) best = i;
    return best;
}

double SimplexVec::entropy() const {
    double h = 0.0;
    for (double v : p_)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

double total_variation(const SimplexVec& a, const SimplexVec& b) {
    if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "total_variation: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

// -------------------------------------------------------------- DiscreteJoint

DiscreteJoint::DiscreteJoint(std::vector<Tensor> y_support, std::vector<Tensor> x_support,
                             Tensor prob)
    : y_support_(std::move(y_support)), x_support_(std::move(x_support)), prob_(std::move(prob)) {
    if (prob_.rank() != 2 || prob_.dim(0) != y_support_.size() ||
        prob_.dim(1) != x_support_.size()) {
        fail(ErrorCode::ShapeMismatch,
             "joint: prob matrix " + prob_.shape_str() + " does not match supports " +
                 std::to_string(y_support_.size()) + "x" + std::to_string(x_support_.size()));
    }
    double total = 0.0;
    for (std::size_t k = 0; k < prob_.size(); ++k) {
        if (prob_.at(k) < 0.0) fail(ErrorCode::Domain, "joint: negative cell probability");
        total += prob_.at(k);
    }
    if (std::abs(total - 1.0) > kSimplexTol) {
        fail(ErrorCode::Domain, "joint: total mass " + std::to_string(total));
    }
    y_marginal_.resize(ny());
    for (std::size_t i = 0; i < ny(); ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < nx(); ++j) m += prob_.at2(i, j);
        y_marginal_[i] = m;
        if (m <= 0.0) {
            fail(ErrorCode::Domain, "joint: y index " + std::to_string(i) + " has zero marginal");
        }
    }
}

SimplexVec DiscreteJoint::conditional(std::size_t y_index) const {
    if (y_index >= ny()) fail(ErrorCode::Domain, "conditional: y index out of range");
    const double m = y_marginal_[y_index];
    if (m <= 0.0) fail(ErrorCode::Precondition, "conditional: zero marginal");
    std::vector<double> q(nx());
    for (std::size_t j = 0; j < nx(); ++j) q[j] = prob(y_index, j) / m;
    return SimplexVec::unchecked(std::move(q));
}

std::vector<std::pair<std::size_t, std::size_t>> DiscreteJoint::sample(RngStream& rng,
                                                                       std::size_t n) const {
    if (n < 1) fail(ErrorCode::Precondition, "sample_joint: n must be >= 1");
    std::vector<double> cdf(prob_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < prob_.size(); ++k) {
        acc += prob_.at(k);
        cdf[k] = acc;
    }
    cdf.back() = 1.0;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double u = rng.next_unit();
        const std::size_t k =
            static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        out.emplace_back(k / nx(), k % nx());
    }
    return out;
}

namespace {
// Random cell masses bounded away from zero, exactly renormalized so the
// residual lands on the last cell and the total is 1.0 to the last bit.
Tensor random_prob_matrix(RngStream& rng, std::size_t ny, std::size_t nx) {
    Tensor p({ny, nx});
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        p.at(k) = rng.next_range(0.5, 1.5);
        total += p.at(k);
    }
    for (std::size_t k = 0; k < p.size(); ++k) p.at(k) /= total;
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) sum += p.at(k);
    p.at(p.size() - 1) = 1.0 - sum;
    return p;
}
}  // namespace

DiscreteJoint DiscreteJoint::random(RngStream& rng, std::size_t ny, std::size_t nx,
                                    std::size_t x_dim) {
    std::vector<Tensor> ys, xs;
    for (std::size_t i = 0; i < ny; ++i) ys.push_back(Tensor::vec({static_cast<double>(i)}));
    for (std::size_t j = 0; j < nx; ++j) {
        Tensor x({x_dim});
        for (std::size_t k = 0; k < x_dim; ++k) x.at(k) = rng.next_range(-1.0, 1.0);
        xs.push_back(std::move(x));
    }
    return DiscreteJoint(std::move(ys), std::move(xs), random_prob_matrix(rng, ny, nx));
}

DiscreteJoint DiscreteJoint::random_onehot(RngStream& rng, std::size_t ny, std::size_t n_classes) {
    std::vector<Tensor> ys, xs;
    for (std::size_t i = 0; i < ny; ++i) ys.push_back(Tensor::vec({static_cast<double>(i)}));
    for (std::size_t j = 0; j < n_classes; ++j) {
        Tensor x({n_classes});
        x.at(j) = 1.0;
        xs.push_back(std::move(x));
    }
    return DiscreteJoint(std::move(ys), std::move(xs), random_prob_matrix(rng, ny, n_classes));
}

// ------------------------------------------------------------ GaussianMixture

GaussianMixture::GaussianMixture(std::size_t dim, std::vector<Component> comps)
    : dim_(dim), comps_(std::move(comps)) {
    if (comps_.empty()) fail(ErrorCode::Domain, "gmm: no components");
    double wsum = 0.0;
    for (const Component& c : comps_) {
        if (c.weight < 0.0) fail(ErrorCode::Domain, "gmm: negative weight");
        if (c.var <= 0.0) fail(ErrorCode::Domain, "gmm: component variance must be positive");
        if (c.mean.size() != dim_) fail(ErrorCode::ShapeMismatch, "gmm: mean dimension mismatch");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > kSimplexTol) {
        fail(ErrorCode::Domain, "gmm: weights sum to " + std::to_string(wsum));
    }
}

std::vector<double> GaussianMixture::responsibilities(const Tensor& y) const {
    std::vector<double> lg(comps_.size());
    double mx = -1e300;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const Component& c = comps_[k];
        double sq = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double d = y.at(i) - c.mean.at(i);
            sq += d * d;
        }
        lg[k] = std::log(c.weight) - 0.5 * sq / c.var -
                0.5 * static_cast<double>(dim_) * (kLog2Pi + std::log(c.var));
        mx = std::max(mx, lg[k]);
    }
    double z = 0.0;
    for (double& v : lg) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : lg) v /= z;
    return lg;
}

double GaussianMixture::log_density(const Tensor& y) const {
    std::vector<double> lg(comps_.size());
    double mx = -1e300;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const Component& c = comps_[k];
        double sq = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double d = y.at(i) - c.mean.at(i);
            sq += d * d;
        }
        lg[k] = std::log(c.weight) - 0.5 * sq / c.var -
                0.5 * static_cast<double>(dim_) * (kLog2Pi + std::log(c.var));
        mx = std::max(mx, lg[k]);
    }
    double z = 0.0;
    for (double v : lg) z += std::exp(v - mx);
    return mx + std::log(z);
}

Tensor GaussianMixture::score(const Tensor& y) const {
    const std::vector<double> r = responsibilities(y);
    Tensor s({dim_});
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const Component& c = comps_[k];
        for (std::size_t i = 0; i < dim_; ++i) s.at(i) += r[k] * (c.mean.at(i) - y.at(i)) / c.var;
    }
    return s;
}

GaussianMixture GaussianMixture::widened(double sigma2) const {
    std::vector<Component> cs = comps_;
    for (Component& c : cs) c.var += sigma2;
    return GaussianMixture(dim_, std::move(cs));
}

Tensor GaussianMixture::posterior_mean(const Tensor& y, double sigma2) const {
    // Responsibilities under the widened mixture, conjugate mean per component.
    const GaussianMixture wide = widened(sigma2);
    const std::vector<double> r = wide.responsibilities(y);
    Tensor m({dim_});
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const Component& c = comps_[k];
        const double denom = c.var + sigma2;
        for (std::size_t i = 0; i < dim_; ++i)
            m.at(i) += r[k] * (c.var * y.at(i) + sigma2 * c.mean.at(i)) / denom;
    }
    return m;
}

Tensor GaussianMixture::sample(RngStream& rng) const {
    const double u = rng.next_unit();
    double acc = 0.0;
    std::size_t pick = comps_.size() - 1;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        acc += comps_[k].weight;
        if (u < acc) {
            pick = k;
            break;
        }
    }
    const Component& c = comps_[pick];
    Tensor x({dim_});
    const double sd = std::sqrt(c.var);
    for (std::size_t i = 0; i < dim_; ++i) x.at(i) = c.mean.at(i) + sd * rng.next_gauss();
    return x;
}

double GaussianMixture::cdf(double y) const {
    if (dim_ != 1) fail(ErrorCode::Precondition, "gmm cdf: scalar mixtures only");
    double acc = 0.0;
    for (const Component& c : comps_) {
        acc += c.weight * 0.5 * (1.0 + std::erf((y - c.mean.at(0)) / std::sqrt(2.0 * c.var)));
    }
    return acc;
}

double GaussianMixture::quantile(double p) const {
    if (dim_ != 1) fail(ErrorCode::Precondition, "gmm quantile: scalar mixtures only");
    if (p <= 0.0 || p >= 1.0) fail(ErrorCode::Domain, "gmm quantile: p in (0,1) required");
    double lo = mean1() - 20.0 * std::sqrt(variance1());
    double hi = mean1() + 20.0 * std::sqrt(variance1());
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double GaussianMixture::mean1() const {
    if (dim_ != 1) fail(ErrorCode::Precondition, "gmm mean1: scalar mixtures only");
    double m = 0.0;
    for (const Component& c : comps_) m += c.weight * c.mean.at(0);
    return m;
}

double GaussianMixture::variance1() const {
    if (dim_ != 1) fail(ErrorCode::Precondition, "gmm variance1: scalar mixtures only");
    const double m = mean1();
    double v = 0.0;
    for (const Component& c : comps_)
        v += c.weight * (c.var + (c.mean.at(0) - m) * (c.mean.at(0) - m));
    return v;
}

GaussianMixture GaussianMixture::random(RngStream& rng, std::size_t n_components, double mean_span,
                                        double var_lo, double var_hi) {
    std::vector<Component> cs;
    double wsum = 0.0;
    for (std::size_t k = 0; k < n_components; ++k) {
        Component c;
        c.weight = rng.next_range(0.2, 1.0);
        c.mean = Tensor::vec({rng.next_range(-mean_span, mean_span)});
        c.var = rng.next_range(var_lo, var_hi);
        wsum += c.weight;
        cs.push_back(std::move(c));
    }
    for (Component& c : cs) c.weight /= wsum;
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cs.size(); ++k) acc += cs[k].weight;
    cs.back().weight = 1.0 - acc;
    return GaussianMixture(1, std::move(cs));
}

// -------------------------------------------------------- GaussianLinearModel

GaussianLinearModel::GaussianLinearModel(Tensor mu0, Tensor sigma0, Tensor a, double sigma_obs2)
    : d_(mu0.size()),
      m_(a.rank() == 2 ? a.dim(0) : 0),
      mu0_(std::move(mu0)),
      sigma0_(std::move(sigma0)),
      a_(std::move(a)),
      sigma_obs2_(sigma_obs2) {
    if (a_.rank() != 2 || a_.dim(1) != d_ || sigma0_.rank() != 2 || sigma0_.dim(0) != d_ ||
        sigma0_.dim(1) != d_) {
        fail(ErrorCode::ShapeMismatch, "glm: operator " + a_.shape_str() + " / prior cov " +
                                           sigma0_.shape_str() + " inconsistent with dim " +
                                           std::to_string(d_));
    }
    if (sigma_obs2_ < 0.0) fail(ErrorCode::Domain, "glm: negative observation variance");
    for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t j = 0; j < d_; ++j)
            if (std::abs(sigma0_.at2(i, j) - sigma0_.at2(j, i)) > 1e-12) {
                fail(ErrorCode::Domain, "glm: prior covariance not symmetric within 1e-12");
            }
    precompute();
}

void GaussianLinearModel::precompute() {
    const Eigen::MatrixXd S0 = to_eigen(sigma0_, d_, d_);
    const Eigen::MatrixXd A = to_eigen(a_, m_, d_);
    Eigen::MatrixXd S = A * S0 * A.transpose();
    for (std::size_t i = 0; i < m_; ++i) S(i, i) += sigma_obs2_;

    // Symmetric pseudo-inverse, tolerance 1e-10 relative to the largest
    // eigenvalue; equals the plain inverse when well conditioned.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    const Eigen::VectorXd lam = es.eigenvalues();
    const double lmax = lam.maxCoeff();
    if (!(lmax > 0.0) || !std::isfinite(lmax)) {
        fail(ErrorCode::Singular,
             "glm: observation covariance has no positive eigenvalue (largest = " +
                 std::to_string(lmax) + ")");
    }
    const double tol = 1e-10 * lmax;
    double lmin_kept = lmax;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) > tol) {
            inv(i) = 1.0 / lam(i);
            lmin_kept = std::min(lmin_kept, lam(i));
        }
    }
    condition_ = lmax / lmin_kept;
    const Eigen::MatrixXd Sinv =
        es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();

    const Eigen::MatrixXd K = S0 * A.transpose() * Sinv;  // posterior gain, d x m
    Eigen::MatrixXd P = S0 - K * A * S0;
    P = 0.5 * (P + P.transpose());

    gain_ = from_eigen(K);
    post_cov_ = from_eigen(P);

    // PSD factors with negative roundoff clamped at zero.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ps(P);
    Eigen::VectorXd pl = ps.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    post_factor_ = from_eigen(ps.eigenvectors() * pl.asDiagonal());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pr(S0);
    if (pr.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, pr.eigenvalues().maxCoeff())) {
        fail(ErrorCode::Domain, "glm: prior covariance not PSD");
    }
    Eigen::VectorXd rl = pr.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    prior_factor_ = from_eigen(pr.eigenvectors() * rl.asDiagonal());
}

GaussianLinearModel::Posterior GaussianLinearModel::posterior(const Tensor& y) const {
    if (y.size() != m_) {
        fail(ErrorCode::ShapeMismatch,
             "glm posterior: observation " + y.shape_str() + " vs m=" + std::to_string(m_));
    }
    const Eigen::MatrixXd A = to_eigen(a_, m_, d_);
    const Eigen::MatrixXd K = to_eigen(gain_, d_, m_);
    const Eigen::VectorXd mu0 = vec_to_eigen(mu0_);
    const Eigen::VectorXd resid = vec_to_eigen(y) - A * mu0;
    const Eigen::VectorXd mean = mu0 + K * resid;
    Posterior p;
    p.mean = from_eigen_vec(mean);
    p.cov = post_cov_;
    Tensor pv({d_});
    for (std::size_t i = 0; i < d_; ++i) pv.at(i) = post_cov_.at2(i, i);
    p.pixel_var = std::move(pv);
    p.condition = condition_;
    return p;
}

std::pair<Tensor, Tensor> GaussianLinearModel::mc_stats(const Tensor& y, std::size_t n_samples,
                                                        RngStream& rng) const {
    if (n_samples < 2) fail(ErrorCode::Precondition, "mc_stats: n_samples must be >= 2");
    Tensor mean({d_});
    Tensor var({d_});
    std::vector<Tensor> draws;
    draws.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Tensor x = sample_posterior(y, rng);
        for (std::size_t i = 0; i < d_; ++i) mean.at(i) += x.at(i);
        draws.push_back(std::move(x));
    }
    for (std::size_t i = 0; i < d_; ++i) mean.at(i) /= static_cast<double>(n_samples);
    // 1/n normalization: estimates the population quantity directly.
    for (const Tensor& x : draws)
        for (std::size_t i = 0; i < d_; ++i) {
            const double dd = x.at(i) - mean.at(i);
            var.at(i) += dd * dd;
        }
    for (std::size_t i = 0; i < d_; ++i) var.at(i) /= static_cast<double>(n_samples);
    return {std::move(mean), std::move(var)};
}

Tensor GaussianLinearModel::sample_prior(RngStream& rng) const {
    Tensor z({d_});
    for (std::size_t i = 0; i < d_; ++i) z.at(i) = rng.next_gauss();
    Tensor x({d_});
    for (std::size_t i = 0; i < d_; ++i) {
        double acc = mu0_.at(i);
        for (std::size_t j = 0; j < d_; ++j) acc += prior_factor_.at2(i, j) * z.at(j);
        x.at(i) = acc;
    }
    return x;
}

Tensor GaussianLinearModel::sample_posterior(const Tensor& y, RngStream& rng) const {
    const Posterior p = posterior(y);
    Tensor z({d_});
    for (std::size_t i = 0; i < d_; ++i) z.at(i) = rng.next_gauss();
    Tensor x({d_});
    for (std::size_t i = 0; i < d_; ++i) {
        double acc = p.mean.at(i);
        for (std::size_t j = 0; j < d_; ++j) acc += post_factor_.at2(i, j) * z.at(j);
        x.at(i) = acc;
    }
    return x;
}

Tensor GaussianLinearModel::observe(const Tensor& x, RngStream& rng) const {
    if (x.size() != d_) fail(ErrorCode::ShapeMismatch, "glm observe: x dimension mismatch");
    Tensor y({m_});
    for (std::size_t i = 0; i < m_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d_; ++j) acc += a_.at2(i, j) * x.at(j);
        y.at(i) = acc;
    }
    if (sigma_obs2_ > 0.0) {
        const double sd = std::sqrt(sigma_obs2_);
        for (std::size_t i = 0; i < m_; ++i) y.at(i) += sd * rng.next_gauss();
    }
    return y;
}

GaussianLinearModel GaussianLinearModel::block_average(std::size_t d, std::size_t m,
                                                       double sigma_obs2, RngStream& rng) {
    if (m == 0 || d % m != 0) {
        fail(ErrorCode::Domain, "block_average: m must divide d");
    }
    const std::size_t block = d / m;
    Tensor A({m, d});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t b = 0; b < block; ++b)
            A.at2(i, i * block + b) = 1.0 / static_cast<double>(block);
    Tensor mu0({d});
    for (std::size_t i = 0; i < d; ++i) mu0.at(i) = rng.next_range(-0.5, 0.5);
    // SPD prior: G G^T / d + 0.3 I, mildly correlated and well conditioned.
    Eigen::MatrixXd G(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) G(i, j) = rng.next_gauss();
    Eigen::MatrixXd S0 = G * G.transpose() / static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) S0(i, i) += 0.3;
    S0 = 0.5 * (S0 + S0.transpose());
    return GaussianLinearModel(std::move(mu0), from_eigen(S0), std::move(A), sigma_obs2);
}

// ------------------------------------------------------- noise2noise pairing

std::vector<NoisePair> make_noise2noise_pairs(
    const std::function<Tensor(RngStream&)>& prior_sampler, std::size_t dim, double sigma1,
    double sigma2, std::uint64_t seed, std::size_t n) {
    if (sigma1 < 0.0 || sigma2 < 0.0) {
        fail(ErrorCode::Domain, "noise2noise pairs: negative noise scale");
    }
    std::vector<NoisePair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RngStream rs(seed, "n2n/clean", i);
        RngStream r1(seed, "n2n/n1", i);
        RngStream r2(seed, "n2n/n2", i);
        NoisePair p;
        p.clean = prior_sampler(rs);
        p.sigma1 = sigma1;
        p.sigma2 = sigma2;
        p.noisy_input = p.clean;
        p.noisy_target = p.clean;
        for (std::size_t k = 0; k < dim; ++k) {
            p.noisy_input.at(k) += sigma1 * r1.next_gauss();
            p.noisy_target.at(k) += sigma2 * r2.next_gauss();
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace riskmin::dist
