#ifndef MINIDS_FIREFLY_HPP
#define MINIDS_FIREFLY_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "minids/metrics.hpp"

namespace minids {

struct non_finite_objective : error {
    explicit non_finite_objective(const std::string& what) : error(what) {}
};

struct FireflyParams {
    size_t population = 20;
    size_t iterations = 50;
    double beta0 = 1.0;         // attractiveness at distance zero
    double gamma_attract = 1.0; // absorption; distinct from the SVM's gamma_rbf
    double alpha0 = 0.2;        // initial randomization amplitude
    double alpha_decay = 0.97;  // per-iteration decay of alpha
    uint64_t seed = 1;
};

struct SearchDim {
    double lo = 0.0, hi = 1.0;
    bool log_scale = false;
};

struct SearchSpace {
    std::vector<SearchDim> dims;
};

inline SearchSpace default_svm_space() {
    SearchSpace s;
    s.dims = {{0.01, 100.0, true}, {0.001, 10.0, true}};
    return s;
}

// Brightness of a location with objective value f: 1/f for positive f,
// otherwise 1 + |f|. Lower objectives are brighter on either side of zero,
// though the two branches do not rank consistently across the sign change;
// the elitist best below therefore tracks raw objective values.
inline double brightness(double f) {
    if (!std::isfinite(f)) throw non_finite_objective("objective value is not finite");
    return f > 0.0 ? 1.0 / f : 1.0 + std::fabs(f);
}

// Rational attenuation beta0 / (1 + gamma r^2).
inline double attractiveness(double r, double beta0, double gamma_attract) {
    return beta0 / (1.0 + gamma_attract * r * r);
}

// One attraction step of firefly xi toward a brighter xj, with the
// exponential attenuation exp(-gamma r^2) and the decayed random kick
// alpha0 * decay^t * eps, eps uniform in [-0.5, 0.5) per dimension.
//
// Positions and box share the optimizer's working coordinates (optimize maps
// every dimension onto [0, 1], taking logs first where flagged). The blended
// update (1-beta) xi + beta xj lands exactly on xj when beta reaches 1.
inline FeatureVector move(const FeatureVector& xi, const FeatureVector& xj,
                          const SearchSpace& box, const FireflyParams& p, size_t t, rng_t& rng) {
    if (xi.size() != xj.size() || xi.size() != box.dims.size())
        throw dimension_mismatch("position and box dimensions disagree");
    double r2 = 0.0;
    for (size_t d = 0; d < xi.size(); ++d) r2 += (xj[d] - xi[d]) * (xj[d] - xi[d]);
    const double beta = p.beta0 * std::exp(-p.gamma_attract * r2);
    const double alpha_t = p.alpha0 * std::pow(p.alpha_decay, double(t));
    FeatureVector out(xi.size());
    for (size_t d = 0; d < xi.size(); ++d) {
        const double eps = uniform01(rng) - 0.5;
        const double v = (1.0 - beta) * xi[d] + beta * xj[d] + alpha_t * eps;
        out[d] = std::clamp(v, box.dims[d].lo, box.dims[d].hi);
    }
    return out;
}

namespace detail {

inline void validate_space(const SearchSpace& space) {
    if (space.dims.empty()) throw error("search space has no dimensions");
    for (const SearchDim& d : space.dims) {
        if (!(d.lo < d.hi)) throw error("search dimension needs lo < hi");
        if (d.log_scale && !(d.lo > 0.0))
            throw error("log-scaled dimension needs positive bounds");
    }
}

// Unit coordinate u in [0, 1] -> external value, log-interpolated where
// flagged. Clamped so a boundary u cannot escape by a rounding ulp.
inline double dim_to_external(const SearchDim& d, double u) {
    double v;
    if (d.log_scale) {
        const double llo = std::log(d.lo), lhi = std::log(d.hi);
        v = std::exp(llo + u * (lhi - llo));
    } else {
        v = d.lo + u * (d.hi - d.lo);
    }
    return std::clamp(v, d.lo, d.hi);
}

} // namespace detail

struct OptimizeResult {
    FeatureVector best; // external units
    double best_objective = std::numeric_limits<double>::infinity();
    std::vector<double> history; // best objective after init, then after each iteration
};

// Deterministic firefly search. Initial positions are uniform in the unit
// working coordinates (so log-uniform on log dimensions). Every iteration
// walks fireflies in index order; each moves once toward every brighter one,
// re-evaluating after each move, and the brightest takes a bare alpha walk
// instead. The returned best is elitist over all evaluations.
template <typename Obj>
OptimizeResult optimize(Obj&& objective, const SearchSpace& space, const FireflyParams& p) {
    detail::validate_space(space);
    if (p.population < 1) throw error("population must be at least 1");
    if (!(p.alpha_decay > 0.0 && p.alpha_decay <= 1.0))
        throw error("alpha_decay must be in (0, 1]");
    if (p.alpha0 < 0.0 || p.gamma_attract < 0.0)
        throw error("alpha0 and gamma_attract must be non-negative");

    const size_t n_dims = space.dims.size();
    SearchSpace unit;
    unit.dims.assign(n_dims, SearchDim{0.0, 1.0, false});

    rng_t rng(p.seed);
    auto to_external = [&](const FeatureVector& u) {
        FeatureVector x(n_dims);
        for (size_t d = 0; d < n_dims; ++d) x[d] = detail::dim_to_external(space.dims[d], u[d]);
        return x;
    };

    std::vector<FeatureVector> pos(p.population, FeatureVector(n_dims));
    std::vector<double> obj(p.population);
    OptimizeResult res;
    auto eval = [&](size_t i) {
        const FeatureVector x = to_external(pos[i]);
        const double f = objective(x);
        if (!std::isfinite(f)) throw non_finite_objective("objective value is not finite");
        obj[i] = f;
        if (f < res.best_objective) {
            res.best_objective = f;
            res.best = x;
        }
    };

    for (size_t i = 0; i < p.population; ++i) {
        for (size_t d = 0; d < n_dims; ++d) pos[i][d] = uniform01(rng);
        eval(i);
    }
    res.history.push_back(res.best_objective);

    for (size_t t = 0; t < p.iterations; ++t) {
        for (size_t i = 0; i < p.population; ++i) {
            bool moved = false;
            for (size_t j = 0; j < p.population; ++j) {
                if (j == i) continue;
                if (brightness(obj[j]) > brightness(obj[i])) {
                    pos[i] = move(pos[i], pos[j], unit, p, t, rng);
                    eval(i);
                    moved = true;
                }
            }
            if (!moved) {
                // nobody outshines this one; explore with the pure alpha walk
                const double alpha_t = p.alpha0 * std::pow(p.alpha_decay, double(t));
                for (size_t d = 0; d < n_dims; ++d)
                    pos[i][d] = std::clamp(pos[i][d] + alpha_t * (uniform01(rng) - 0.5), 0.0, 1.0);
                eval(i);
            }
        }
        res.history.push_back(res.best_objective);
    }
    return res;
}

// ---- SVM hyperparameter tuning ----

struct TuneResult {
    double c_param = 1.0;
    double gamma_rbf = 0.1;
    double fitness = 0.0;        // mean cross-validated detection accuracy at the best point
    std::vector<double> history; // best objective trace from the underlying optimize
};

// Searches (C, gamma_rbf), log-scaled, minimizing 1 - mean cross-validated
// detection accuracy. A tiny multiple of the mean FPR breaks exact accuracy
// ties toward the quieter model. The fold partition comes from a seed fixed
// once per call, so every candidate sees identical folds.
inline TuneResult tune_svm(const LabeledDataset& ds, const SearchSpace& space,
                           const FireflyParams& params, size_t cv_k) {
    if (space.dims.size() != 2) throw error("svm tuning space needs exactly (C, gamma) dimensions");
    const uint64_t fold_seed = derive_seed(params.seed, 0x5eed);
    auto cv_at = [&](double c_param, double gamma_rbf) {
        ClassifierSpec spec;
        spec.kind = ClassifierSpec::kind_t::svm;
        spec.c_param = c_param;
        spec.gamma_rbf = gamma_rbf;
        return cross_validate(ds, spec, cv_k, fold_seed);
    };
    const OptimizeResult opt = optimize(
        [&](const FeatureVector& x) {
            const CvResult cv = cv_at(x[0], x[1]);
            return (1.0 - cv.mean.da) + 1e-9 * cv.mean.fpr;
        },
        space, params);

    TuneResult out;
    out.c_param = opt.best[0];
    out.gamma_rbf = opt.best[1];
    out.fitness = cv_at(out.c_param, out.gamma_rbf).mean.da;
    out.history = opt.history;
    return out;
}

// ---- report serialization ----

inline nlohmann::json firefly_params_to_json(const FireflyParams& p) {
    return {{"population", p.population}, {"iterations", p.iterations}, {"beta0", p.beta0},
            {"gamma_attract", p.gamma_attract}, {"alpha0", p.alpha0},
            {"alpha_decay", p.alpha_decay}, {"seed", p.seed}};
}

inline nlohmann::json space_to_json(const SearchSpace& s) {
    nlohmann::json bounds = nlohmann::json::array();
    for (const SearchDim& d : s.dims)
        bounds.push_back({{"lo", d.lo}, {"hi", d.hi}, {"log_scale", d.log_scale}});
    return bounds;
}

inline nlohmann::json tune_to_json(const TuneResult& r, const FireflyParams& p,
                                   const SearchSpace& s) {
    nlohmann::json j;
    j["seed"] = p.seed;
    j["params"] = firefly_params_to_json(p);
    j["bounds"] = space_to_json(s);
    j["best_c"] = r.c_param;
    j["best_gamma"] = r.gamma_rbf;
    j["fitness"] = r.fitness;
    j["history"] = r.history;
    return j;
}

} // namespace minids

#endif
