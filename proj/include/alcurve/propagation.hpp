#pragma once

// Probability propagation over the sample-adjacency graph: classifier
// probabilities are diffused along edges with RBF affinities, and samples
// whose prediction disagrees with their neighbourhood end up uncertain.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "alcurve/errors.hpp"
#include "alcurve/graph.hpp"

namespace alcurve {

enum class Support { neighbors_only, global };

struct AffinityMatrix {
    Eigen::MatrixXd weights;
    double sigma = 1.0;
    Support support = Support::neighbors_only;

    std::size_t size() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

// Row i is (p(y_i = 0), p(y_i = 1)).
using ProbabilityTable = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct PropagationConfig {
    double alpha = 0.9;
    // RBF bandwidth; unset selects median_adjacent_distance().
    std::optional<double> sigma = 1.0;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("propagation alpha must be in (0, 1)");
        if (sigma && !(*sigma > 0.0)) throw ConfigError("propagation sigma must be positive");
    }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline double rbf(double squared_dist, double sigma) { return std::exp(-squared_dist / (2.0 * sigma * sigma)); }

// Bandwidth fallback: median feature distance over adjacent pairs.
inline double median_adjacent_distance(const SampleGraph& sg) {
    std::vector<double> d;
    for (auto [i, j] : sg.edge_list()) d.push_back(std::sqrt(squared_distance(sg.sample(i).features, sg.sample(j).features)));
    if (d.empty()) return 1.0;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
    const double m = d[d.size() / 2];
    return m > 0.0 ? m : 1.0;
}

// w_ij = exp(-||x_i - x_j||^2 / 2 sigma^2). Neighbors-only support zeroes
// non-adjacent pairs and the diagonal; global support keeps every pair and
// has a unit diagonal.
inline AffinityMatrix build_affinity(const SampleGraph& sg, double sigma, Support support) {
    if (!(sigma > 0.0)) throw ConfigError("affinity bandwidth must be positive");
    const auto n = static_cast<Eigen::Index>(sg.size());
    AffinityMatrix a{Eigen::MatrixXd::Zero(n, n), sigma, support};
    if (support == Support::neighbors_only) {
        for (auto [i, j] : sg.edge_list()) {
            const double w = rbf(squared_distance(sg.sample(i).features, sg.sample(j).features), sigma);
            a.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
            a.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            a.weights(i, i) = 1.0;
            const auto& xi = sg.sample(static_cast<std::size_t>(i)).features;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double w = rbf(squared_distance(xi, sg.sample(static_cast<std::size_t>(j)).features), sigma);
                a.weights(i, j) = w;
                a.weights(j, i) = w;
            }
        }
    }
    return a;
}

// S = D^-1/2 W D^-1/2 with d_ii = sum_j w_ij. Isolated samples get zero rows
// and columns.
inline Eigen::MatrixXd normalize_symmetric(const AffinityMatrix& w) {
    const Eigen::VectorXd degree = w.weights.rowwise().sum();
    Eigen::VectorXd inv_sqrt(degree.size());
    for (Eigen::Index i = 0; i < degree.size(); ++i) inv_sqrt(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
    return inv_sqrt.asDiagonal() * w.weights * inv_sqrt.asDiagonal();
}

inline ProbabilityTable probability_table(std::span<const double> positive) {
    ProbabilityTable p(static_cast<Eigen::Index>(positive.size()), 2);
    for (std::size_t i = 0; i < positive.size(); ++i) {
        p(static_cast<Eigen::Index>(i), 0) = 1.0 - positive[i];
        p(static_cast<Eigen::Index>(i), 1) = positive[i];
    }
    return p;
}

// Labeled rows become one-hot; other rows are left alone.
inline ProbabilityTable clamp_labels(ProbabilityTable p, const LabelSet& labels) {
    for (const auto& [i, y] : labels.entries()) {
        if (i >= static_cast<std::size_t>(p.rows())) throw GraphError("label index outside probability table");
        const auto r = static_cast<Eigen::Index>(i);
        p(r, 0) = y == 0 ? 1.0 : 0.0;
        p(r, 1) = y == 1 ? 1.0 : 0.0;
    }
    return p;
}

inline void normalize_rows(ProbabilityTable& p) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double s = p(i, 0) + p(i, 1);
        if (!(s > 0.0)) throw NumericalError("row " + std::to_string(i) + " has zero probability mass");
        p.row(i) /= s;
    }
}

namespace detail {

inline void check_propagation_inputs(const ProbabilityTable& p0, const Eigen::MatrixXd& s, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("propagation alpha must be in (0, 1)");
    if (s.rows() != s.cols() || s.rows() != p0.rows()) throw NumericalError("propagation inputs have mismatched sizes");
    for (Eigen::Index i = 0; i < p0.rows(); ++i) {
        if (p0(i, 0) < 0.0 || p0(i, 1) < 0.0 || !(p0(i, 0) + p0(i, 1) > 0.0) || !p0.row(i).allFinite()) {
            throw NumericalError("prior row " + std::to_string(i) + " must be nonnegative with positive mass");
        }
    }
}

} // namespace detail

// Solves (I - alpha S) P = P0 and normalizes each row of the solution. A
// sparse Cholesky factorization is used when S is sparse.
inline ProbabilityTable propagate_closed_form(const ProbabilityTable& p0, const Eigen::MatrixXd& s, double alpha) {
    detail::check_propagation_inputs(p0, s, alpha);
    const Eigen::Index n = s.rows();
    ProbabilityTable result(n, 2);
    const Eigen::Index nonzeros = (s.array() != 0.0).count();
    if (nonzeros * 10 < n * n) {
        Eigen::SparseMatrix<double> a(n, n);
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(nonzeros + n));
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double v = (i == j ? 1.0 : 0.0) - alpha * s(i, j);
                if (v != 0.0) entries.emplace_back(i, j, v);
            }
        }
        a.setFromTriplets(entries.begin(), entries.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
        if (solver.info() != Eigen::Success) throw NumericalError("propagation system is singular");
        result = solver.solve(p0);
        if (solver.info() != Eigen::Success) throw NumericalError("propagation solve failed");
    } else {
        const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - alpha * s;
        Eigen::LDLT<Eigen::MatrixXd> solver(a);
        if (solver.info() != Eigen::Success || !solver.isPositive()) {
            throw NumericalError("propagation system is singular");
        }
        result = solver.solve(p0);
    }
    if (!result.allFinite()) throw NumericalError("propagation produced non-finite values");
    normalize_rows(result);
    return result;
}

enum class RowNormalization {
    // P <- aSP + (1-a)P0 to convergence, rows normalized once at the end.
    // Same fixed point as the closed form.
    at_end,
    // Rows normalized after every step. Converges to a different fixed point
    // whenever the rows of (I - aS)^-1 have unequal sums.
    each_step,
};

struct IterationResult {
    ProbabilityTable table;
    std::size_t iterations = 0;
};

// Fixed-point iteration; stops when the max-abs change between iterates
// falls below `tol`.
inline IterationResult propagate_iterative_detailed(const ProbabilityTable& p0, const Eigen::MatrixXd& s, double alpha,
                                                    double tol, std::size_t max_iter,
                                                    RowNormalization mode = RowNormalization::at_end) {
    detail::check_propagation_inputs(p0, s, alpha);
    if (!(tol > 0.0)) throw ConfigError("iteration tolerance must be positive");
    ProbabilityTable p = p0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        ProbabilityTable next = alpha * (s * p) + (1.0 - alpha) * p0;
        if (mode == RowNormalization::each_step) normalize_rows(next);
        const double change = (next - p).cwiseAbs().maxCoeff();
        p = std::move(next);
        if (change < tol) {
            if (mode == RowNormalization::at_end) normalize_rows(p);
            return IterationResult{std::move(p), it};
        }
    }
    throw NumericalError("propagation did not converge in " + std::to_string(max_iter) + " iterations");
}

inline ProbabilityTable propagate_iterative(const ProbabilityTable& p0, const Eigen::MatrixXd& s, double alpha,
                                            double tol, std::size_t max_iter,
                                            RowNormalization mode = RowNormalization::at_end) {
    return propagate_iterative_detailed(p0, s, alpha, tol, max_iter, mode).table;
}

// Binary Shannon entropy in nats, 0 ln 0 = 0.
inline double entropy(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
    return h;
}

// Entropy of every propagated row; labeled samples are forced to 0.
inline std::vector<double> propagated_entropy(const ProbabilityTable& p, const LabelSet& labels) {
    std::vector<double> h(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double s = p(i, 0) + p(i, 1);
        h[static_cast<std::size_t>(i)] = labels.contains(static_cast<std::size_t>(i)) ? 0.0 : entropy(p(i, 1) / s);
    }
    return h;
}

// Factorizes I - alpha S once for a fixed graph, then propagates any number of
// priors. Used inside the active-learning loop where only P0 changes.
class Propagator {
public:
    Propagator(const SampleGraph& sg, const PropagationConfig& cfg) : alpha_(cfg.alpha) {
        cfg.validate();
        sigma_ = cfg.sigma.value_or(median_adjacent_distance(sg));
        s_ = normalize_symmetric(build_affinity(sg, sigma_, Support::neighbors_only));
        const auto n = s_.rows();
        std::vector<Eigen::Triplet<double>> entries;
        for (Eigen::Index i = 0; i < n; ++i) entries.emplace_back(i, i, 1.0);
        for (auto [i, j] : sg.edge_list()) {
            const auto a = static_cast<Eigen::Index>(i);
            const auto b = static_cast<Eigen::Index>(j);
            if (s_(a, b) != 0.0) {
                entries.emplace_back(a, b, -alpha_ * s_(a, b));
                entries.emplace_back(b, a, -alpha_ * s_(b, a));
            }
        }
        Eigen::SparseMatrix<double> system(n, n);
        system.setFromTriplets(entries.begin(), entries.end());
        solver_.compute(system);
        if (solver_.info() != Eigen::Success) throw NumericalError("propagation system is singular");
    }

    ProbabilityTable propagate(const ProbabilityTable& p0) const {
        detail::check_propagation_inputs(p0, s_, alpha_);
        ProbabilityTable result = solver_.solve(p0);
        if (solver_.info() != Eigen::Success || !result.allFinite()) throw NumericalError("propagation solve failed");
        normalize_rows(result);
        return result;
    }

    double sigma() const noexcept { return sigma_; }
    const Eigen::MatrixXd& normalized_affinity() const noexcept { return s_; }

private:
    double alpha_;
    double sigma_ = 1.0;
    Eigen::MatrixXd s_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

// Classifier probabilities -> clamped prior -> propagated table.
inline ProbabilityTable propagate_probabilities(const SampleGraph& sg, std::span<const double> positive,
                                                const LabelSet& labels, const PropagationConfig& cfg) {
    cfg.validate();
    const double sigma = cfg.sigma.value_or(median_adjacent_distance(sg));
    const Eigen::MatrixXd s = normalize_symmetric(build_affinity(sg, sigma, Support::neighbors_only));
    return propagate_closed_form(clamp_labels(probability_table(positive), labels), s, cfg.alpha);
}

} // namespace alcurve
