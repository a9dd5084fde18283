#include "riskmin/risk.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "riskmin/error.hpp"

namespace riskmin::risk {

namespace {

constexpr double kSimplexTol = 1e-9;

bool on_simplex(const Tensor& t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.at(i) < 0.0) return false;
        sum += t.at(i);
    }
    return std::abs(sum - 1.0) <= kSimplexTol;
}

bool is_onehot(const Tensor& t) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (std::abs(t.at(i) - 1.0) <= 1e-12) {
            ++ones;
        } else if (std::abs(t.at(i)) > 1e-12) {
            return false;
        }
    }
    return ones == 1;
}

}  // namespace

// --------------------------------------------------------------------- LossFn

LossValue LossFn::eval(const Tensor& a, const Tensor& b) const {
    require_same_shape(a, b, "loss");
    if (kind_ == LossKind::L2) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a.at(i) - b.at(i);
            s += d * d;
        }
        return LossValue::of(s);
    }
    if (!on_simplex(a) || !on_simplex(b)) return LossValue::inf();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (b.at(i) == 0.0) continue;  // 0 log 0 = 0
        if (a.at(i) <= 0.0) return LossValue::inf();
        s -= b.at(i) * std::log(a.at(i));
    }
    return LossValue::of(s);
}

// ------------------------------------------------------------------- LabelMap

LabelMap LabelMap::identity_x() {
    LabelMap m;
    m.kind_ = Kind::IdentityX;
    return m;
}

LabelMap LabelMap::score_label(double sigma2) {
    if (sigma2 <= 0.0) fail(ErrorCode::Domain, "score_label: sigma2 must be positive");
    LabelMap m;
    m.kind_ = Kind::ScoreLabel;
    m.sigma2_ = sigma2;
    return m;
}

LabelMap LabelMap::squared_residual(std::function<Tensor(const Tensor&)> mean_fn) {
    if (!mean_fn) fail(ErrorCode::Precondition, "squared_residual: mean function required");
    LabelMap m;
    m.kind_ = Kind::SquaredResidual;
    m.mean_fn_ = std::move(mean_fn);
    return m;
}

Tensor LabelMap::apply(const Tensor& x, const Tensor& y) const {
    switch (kind_) {
        case Kind::IdentityX:
            return x;
        case Kind::ScoreLabel: {
            require_same_shape(x, y, "score_label");
            Tensor out = x;
            for (std::size_t i = 0; i < out.size(); ++i)
                out.at(i) = (x.at(i) - y.at(i)) / sigma2_;
            return out;
        }
        case Kind::SquaredResidual: {
            const Tensor mean = mean_fn_(y);
            require_same_shape(x, mean, "squared_residual");
            Tensor out = x;
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double d = x.at(i) - mean.at(i);
                out.at(i) = d * d;
            }
            return out;
        }
    }
    fail(ErrorCode::Domain, "label map: unknown kind");
}

// ----------------------------------------------------------- conditional risk

LossValue conditional_risk(const LossFn& loss, const Tensor& z, const SimplexVec& cond,
                           const std::vector<Tensor>& x_support, const LabelMap& g,
                           const Tensor& y) {
    if (cond.size() != x_support.size()) {
        fail(ErrorCode::ShapeMismatch, "conditional_risk: conditional size " +
                                           std::to_string(cond.size()) + " vs support size " +
                                           std::to_string(x_support.size()));
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < x_support.size(); ++j) {
        if (cond[j] == 0.0) continue;
        const LossValue lv = loss.eval(z, g.apply(x_support[j], y));
        if (lv.infinite) return LossValue::inf();
        acc += cond[j] * lv.value;
    }
    return LossValue::of(acc);
}

// ------------------------------------------------------------------ zstar ops

Tensor zstar_closed_form(const LossFn& loss, const SimplexVec& cond,
                         const std::vector<Tensor>& x_support, const LabelMap& g,
                         const Tensor& y) {
    if (cond.size() != x_support.size()) {
        fail(ErrorCode::ShapeMismatch, "zstar: conditional/support size mismatch");
    }
    if (loss.kind() == LossKind::CrossEntropy) {
        if (g.kind() != LabelMap::Kind::IdentityX) {
            fail(ErrorCode::Precondition,
                 "zstar_closed_form: cross-entropy requires identity labels over one-hot "
                 "outcomes; use zstar_bruteforce for other label maps");
        }
        for (const Tensor& x : x_support) {
            if (!is_onehot(x)) {
                fail(ErrorCode::Precondition,
                     "zstar_closed_form: cross-entropy outcomes must be one-hot; use "
                     "zstar_bruteforce instead");
            }
        }
    }
    // Conditional mean of g; for CE over one-hots this is exactly q_y.
    Tensor first = g.apply(x_support[0], y);
    Tensor acc(first.shape());
    for (std::size_t j = 0; j < x_support.size(); ++j) {
        const Tensor gj = g.apply(x_support[j], y);
        require_same_shape(gj, acc, "zstar");
        for (std::size_t i = 0; i < acc.size(); ++i) acc.at(i) += cond[j] * gj.at(i);
    }
    return acc;
}

namespace {

// Visit the barycentric lattice { k / m : sum k = m } in lexicographic order.
void enumerate_simplex(std::size_t dims, std::size_t m, std::vector<std::size_t>& partial,
                       const std::function<void(const std::vector<std::size_t>&)>& visit) {
    if (partial.size() + 1 == dims) {
        std::size_t used = 0;
        for (std::size_t v : partial) used += v;
        partial.push_back(m - used);
        visit(partial);
        partial.pop_back();
        return;
    }
    std::size_t used = 0;
    for (std::size_t v : partial) used += v;
    for (std::size_t k = 0; k + used <= m; ++k) {
        partial.push_back(k);
        enumerate_simplex(dims, m, partial, visit);
        partial.pop_back();
    }
}

double golden_section_min(const std::function<double(double)>& f, double lo, double hi) {
    constexpr double phi = 0.6180339887498948482;
    double a = lo, b = hi;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

Tensor zstar_bruteforce(const LossFn& loss, const SimplexVec& cond,
                        const std::vector<Tensor>& x_support, const LabelMap& g, const Tensor& y,
                        const GridSpec& grid) {
    auto risk_at = [&](const Tensor& z) {
        return conditional_risk(loss, z, cond, x_support, g, y);
    };

    if (loss.kind() == LossKind::CrossEntropy) {
        const std::size_t n = g.apply(x_support[0], y).size();
        const std::size_t m = static_cast<std::size_t>(std::llround(1.0 / grid.simplex_step));
        if (m == 0) fail(ErrorCode::Domain, "zstar_bruteforce: simplex step too coarse");
        if (n > 4) {
            fail(ErrorCode::Precondition,
                 "zstar_bruteforce: simplex lattice limited to 4 classes at step " +
                     std::to_string(grid.simplex_step));
        }
        LossValue best = LossValue::inf();
        Tensor best_z({n});
        bool found = false;
        std::vector<std::size_t> partial;
        enumerate_simplex(n, m, partial, [&](const std::vector<std::size_t>& k) {
            Tensor z({n});
            for (std::size_t i = 0; i < n; ++i)
                z.at(i) = static_cast<double>(k[i]) / static_cast<double>(m);
            const LossValue r = risk_at(z);
            if (!found || r.less_than(best)) {  // strict: first lexicographic point keeps ties
                best = r;
                best_z = z;
                found = true;
            }
        });
        if (!found || best.infinite) {
            fail(ErrorCode::Domain, "zstar_bruteforce: no finite-risk lattice point");
        }
        return best_z;
    }

    // L2 box grid.
    const std::size_t dims = grid.lo.size();
    if (dims == 0 || dims != grid.hi.size()) {
        fail(ErrorCode::Domain, "zstar_bruteforce: empty or inconsistent grid");
    }
    if (dims > 3) fail(ErrorCode::Precondition, "zstar_bruteforce: box grids limited to 3 dims");
    std::vector<std::size_t> counts(dims);
    std::size_t total = 1;
    for (std::size_t a = 0; a < dims; ++a) {
        if (grid.hi[a] < grid.lo[a] || grid.step <= 0.0) {
            fail(ErrorCode::Domain, "zstar_bruteforce: bad grid axis");
        }
        counts[a] =
            static_cast<std::size_t>(std::floor((grid.hi[a] - grid.lo[a]) / grid.step)) + 1;
        total *= counts[a];
    }
    if (total > 20'000'000) fail(ErrorCode::Domain, "zstar_bruteforce: grid too large");

    Tensor z({dims});
    Tensor best_z({dims});
    LossValue best = LossValue::inf();
    bool found = false;
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (std::size_t a = dims; a-- > 0;) {
            z.at(a) = grid.lo[a] + grid.step * static_cast<double>(rem % counts[a]);
            rem /= counts[a];
        }
        const LossValue r = risk_at(z);
        if (!found || r.less_than(best)) {
            best = r;
            best_z = z;
            found = true;
        }
    }
    // One golden-section pass per axis around the winning cell.
    for (std::size_t a = 0; a < dims; ++a) {
        Tensor probe = best_z;
        const double t = golden_section_min(
            [&](double v) {
                probe.at(a) = v;
                const LossValue r = risk_at(probe);
                return r.infinite ? 1e300 : r.value;
            },
            std::max(grid.lo[a], best_z.at(a) - grid.step),
            std::min(grid.hi[a], best_z.at(a) + grid.step));
        probe.at(a) = t;
        if (risk_at(probe).less_than(best)) {
            best = risk_at(probe);
            best_z = probe;
        }
    }
    return best_z;
}

// ------------------------------------------------------------------ gap check

GapReport theorem2_gap_check(const LossFn& loss, const DiscreteJoint& joint, const LabelMap& g,
                             const std::vector<std::vector<Tensor>>& probes) {
    if (loss.kind() != LossKind::L2) {
        fail(ErrorCode::Precondition, "theorem2_gap_check: the constant-gap identity is L2-only");
    }
    if (probes.size() < 2) fail(ErrorCode::Precondition, "theorem2_gap_check: need >= 2 probes");

    // z*(y_i) = E[g | y_i] and the two constants, all by exact enumeration.
    std::vector<Tensor> zstar(joint.ny());
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t i = 0; i < joint.ny(); ++i) {
        const SimplexVec cond = joint.conditional(i);
        zstar[i] = zstar_closed_form(loss, cond, joint.x_support(), g, joint.y(i));
        double znorm = 0.0;
        for (std::size_t k = 0; k < zstar[i].size(); ++k) znorm += zstar[i].at(k) * zstar[i].at(k);
        c1 += joint.y_marginal(i) * znorm;
        for (std::size_t j = 0; j < joint.nx(); ++j) {
            const Tensor gj = g.apply(joint.x(j), joint.y(i));
            double gnorm = 0.0;
            for (std::size_t k = 0; k < gj.size(); ++k) gnorm += gj.at(k) * gj.at(k);
            c2 += joint.prob(i, j) * gnorm;
        }
    }

    GapReport rep;
    rep.c1 = c1;
    rep.c2 = c2;
    rep.c_theory = c2 - c1;
    for (const std::vector<Tensor>& f : probes) {
        if (f.size() != joint.ny()) {
            fail(ErrorCode::ShapeMismatch, "theorem2_gap_check: probe table size mismatch");
        }
        double jz = 0.0, jg = 0.0;
        for (std::size_t i = 0; i < joint.ny(); ++i) {
            const LossValue lz = loss.eval(f[i], zstar[i]);
            jz += joint.y_marginal(i) * lz.value;
            for (std::size_t j = 0; j < joint.nx(); ++j) {
                const LossValue lg = loss.eval(f[i], g.apply(joint.x(j), joint.y(i)));
                jg += joint.prob(i, j) * lg.value;
            }
        }
        rep.j_zstar.push_back(jz);
        rep.j_g.push_back(jg);
        rep.diff.push_back(jg - jz);
    }
    double mean = 0.0;
    for (double d : rep.diff) mean += d;
    rep.c_emp = mean / static_cast<double>(rep.diff.size());
    for (double d : rep.diff) rep.max_dev = std::max(rep.max_dev, std::abs(d - rep.c_emp));
    return rep;
}

std::vector<std::vector<Tensor>> random_probes(const DiscreteJoint& joint, const LabelMap& g,
                                               std::size_t n_probes, RngStream& rng) {
    const std::size_t w = g.apply(joint.x(0), joint.y(0)).size();
    std::vector<std::vector<Tensor>> probes(n_probes);
    for (std::size_t p = 0; p < n_probes; ++p) {
        probes[p].reserve(joint.ny());
        for (std::size_t i = 0; i < joint.ny(); ++i) {
            Tensor f({w});
            for (std::size_t k = 0; k < w; ++k) f.at(k) = rng.next_range(-1.5, 1.5);
            probes[p].push_back(std::move(f));
        }
    }
    return probes;
}

// ----------------------------------------------------------- hypothesis probe

SimplexVec random_simplex(RngStream& rng, std::size_t n) {
    // Exponential spacings normalized; exact renormalization on the last slot.
    std::vector<double> v(n);
    double sum = 0.0;
    for (double& x : v) {
        x = -std::log(1.0 - rng.next_unit());
        sum += x;
    }
    for (double& x : v) x /= sum;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) acc += v[i];
    v[n - 1] = 1.0 - acc;
    return SimplexVec(std::move(v));
}

namespace {

HypothesisReport probe_loss(const std::function<LossValue(const Tensor&, const Tensor&)>& loss,
                            const std::function<Tensor(RngStream&)>& draw, RngStream& rng,
                            std::size_t n_probes) {
    if (n_probes < 1) fail(ErrorCode::Precondition, "loss_hypothesis_probe: n_probes >= 1");
    HypothesisReport rep;
    rep.n_probes = n_probes;
    for (std::size_t t = 0; t < n_probes; ++t) {
        const Tensor a = draw(rng);
        const Tensor b = draw(rng);
        const LossValue ab = loss(a, b);
        const LossValue aa = loss(a, a);
        const LossValue bb = loss(b, b);
        if (ab.infinite) continue;  // out-of-domain pair, nothing to compare
        constexpr double slack = 1e-12;
        if (!aa.infinite && ab.value < aa.value - slack && rep.holds_ab_ge_aa) {
            rep.holds_ab_ge_aa = false;
            rep.counterexample_aa = {a, b};
        }
        if (!bb.infinite && ab.value < bb.value - slack && rep.holds_ab_ge_bb) {
            rep.holds_ab_ge_bb = false;
            rep.counterexample_bb = {a, b};
        }
    }
    return rep;
}

}  // namespace

HypothesisReport loss_hypothesis_probe(const LossFn& loss, RngStream& rng, std::size_t n_probes) {
    if (loss.kind() == LossKind::L2) {
        auto draw = [](RngStream& r) {
            Tensor t({3});
            for (std::size_t i = 0; i < 3; ++i) t.at(i) = r.next_range(-1.0, 1.0);
            return t;
        };
        return probe_loss([&](const Tensor& a, const Tensor& b) { return loss.eval(a, b); }, draw,
                          rng, n_probes);
    }
    auto draw = [](RngStream& r) { return Tensor::vec(random_simplex(r, 4).values()); };
    return probe_loss([&](const Tensor& a, const Tensor& b) { return loss.eval(a, b); }, draw, rng,
                      n_probes);
}

HypothesisReport loss_hypothesis_probe(
    const std::function<double(const Tensor&, const Tensor&)>& loss, std::size_t dim,
    RngStream& rng, std::size_t n_probes) {
    auto draw = [dim](RngStream& r) {
        Tensor t({dim});
        for (std::size_t i = 0; i < dim; ++i) t.at(i) = r.next_range(-1.0, 1.0);
        return t;
    };
    return probe_loss([&](const Tensor& a, const Tensor& b) { return LossValue::of(loss(a, b)); },
                      draw, rng, n_probes);
}

}  // namespace riskmin::risk
