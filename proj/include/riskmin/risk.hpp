#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "riskmin/distributions.hpp"
#include "riskmin/rng.hpp"
#include "riskmin/tensor.hpp"

namespace riskmin::risk {

using dist::DiscreteJoint;
using dist::SimplexVec;
using num::Tensor;

enum class LossKind { L2, CrossEntropy };

// Loss values carry an explicit out-of-domain tag instead of a floating
// infinity, so risk aggregation can short-circuit without NaN pollution.
struct LossValue {
    double value = 0.0;
    bool infinite = false;

    static LossValue of(double v) { return {v, false}; }
    static LossValue inf() { return {0.0, true}; }
    bool less_than(const LossValue& o) const {
        if (infinite) return false;
        if (o.infinite) return true;
        return value < o.value;
    }
};

class LossFn {
public:
    explicit LossFn(LossKind kind) : kind_(kind) {}
    LossKind kind() const { return kind_; }
    // L2: squared Euclidean norm of a-b. Cross-entropy: -sum_i b_i log a_i,
    // defined only when both arguments lie on the simplex (else the +inf tag).
    LossValue eval(const Tensor& a, const Tensor& b) const;

private:
    LossKind kind_;
};

inline LossValue loss_eval(const LossFn& l, const Tensor& a, const Tensor& b) {
    return l.eval(a, b);
}

// The label construction g(x, y): what the trainable model actually regresses
// on. identity keeps x; score_label is the conditional score (x - y) / sigma2
// of Gaussian corruption; squared_residual is the plug-in variance label
// (x - mean(y))^2.
class LabelMap {
public:
    enum class Kind { IdentityX, ScoreLabel, SquaredResidual };

    static LabelMap identity_x();
    static LabelMap score_label(double sigma2);
    static LabelMap squared_residual(std::function<Tensor(const Tensor&)> mean_fn);

    Kind kind() const { return kind_; }
    Tensor apply(const Tensor& x, const Tensor& y) const;

private:
    LabelMap() = default;
    Kind kind_ = Kind::IdentityX;
    double sigma2_ = 0.0;
    std::function<Tensor(const Tensor&)> mean_fn_;
};

// Exact inner expectation of Eq-style conditional risk over a finite support:
// sum_j cond_j * L(z, g(x_j, y)).
LossValue conditional_risk(const LossFn& loss, const Tensor& z, const SimplexVec& cond,
                           const std::vector<Tensor>& x_support, const LabelMap& g,
                           const Tensor& y);

// Closed-form minimizer: conditional mean of g for L2; the conditional class
// distribution q_y for cross-entropy with identity labels over one-hots.
Tensor zstar_closed_form(const LossFn& loss, const SimplexVec& cond,
                         const std::vector<Tensor>& x_support, const LabelMap& g, const Tensor& y);

struct GridSpec {
    std::vector<double> lo;   // per axis (L2 box grids)
    std::vector<double> hi;
    double step = 1e-2;
    double simplex_step = 0.01;  // barycentric lattice pitch for CE
};

// Grid argmin of the conditional risk, ties to the lexicographically first
// grid point; box grids get one golden-section refinement pass per axis.
Tensor zstar_bruteforce(const LossFn& loss, const SimplexVec& cond,
                        const std::vector<Tensor>& x_support, const LabelMap& g, const Tensor& y,
                        const GridSpec& grid);

struct GapReport {
    std::vector<double> j_zstar;  // E_y ||f - z*||^2 per probe
    std::vector<double> j_g;      // E_{x,y} ||f - g||^2 per probe
    std::vector<double> diff;     // j_g - j_zstar per probe
    double c_emp = 0.0;           // mean of diff
    double c_theory = 0.0;        // C2 - C1
    double c1 = 0.0;              // E_y ||E[g|y]||^2
    double c2 = 0.0;              // E_{x,y} ||g||^2
    double max_dev = 0.0;         // max |diff - c_emp|
};

// The L2 constant-gap identity, exact by enumeration: for every probe f the
// two objectives differ by C = C2 - C1 regardless of f.
GapReport theorem2_gap_check(const LossFn& loss, const DiscreteJoint& joint, const LabelMap& g,
                             const std::vector<std::vector<Tensor>>& probes);

// Random probe tables (one W-value per y-support point) shaped like g outputs.
std::vector<std::vector<Tensor>> random_probes(const DiscreteJoint& joint, const LabelMap& g,
                                               std::size_t n_probes, RngStream& rng);

struct HypothesisReport {
    std::size_t n_probes = 0;
    bool holds_ab_ge_aa = true;  // L(a,b) >= L(a,a)
    bool holds_ab_ge_bb = true;  // L(a,b) >= L(b,b)
    std::optional<std::pair<Tensor, Tensor>> counterexample_aa;
    std::optional<std::pair<Tensor, Tensor>> counterexample_bb;
    bool pass() const { return holds_ab_ge_aa && holds_ab_ge_bb; }
};

// Random probes of the loss hypothesis on the loss's natural domain
// (vectors for L2, simplex pairs for CE).
HypothesisReport loss_hypothesis_probe(const LossFn& loss, RngStream& rng, std::size_t n_probes);

// Same probe against an arbitrary scalar loss over [-1,1]^dim vectors.
HypothesisReport loss_hypothesis_probe(
    const std::function<double(const Tensor&, const Tensor&)>& loss, std::size_t dim,
    RngStream& rng, std::size_t n_probes);

// Uniform point on the (n-1)-simplex.
SimplexVec random_simplex(RngStream& rng, std::size_t n);

}  // namespace riskmin::risk
