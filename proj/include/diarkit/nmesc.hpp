#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "diarkit/embedding.hpp"
#include "diarkit/rng.hpp"

namespace diarkit {

struct NmescConfig {
    int max_speakers = 4;
    double max_neighbor_fraction = 0.25;
    std::optional<int> fixed_speakers;
    double overlap_ratio_rule_threshold = 0.20;
    uint64_t kmeans_seed = 7;

    void validate() const {
        if (max_speakers < 1) throw std::invalid_argument("nmesc: max_speakers must be >= 1");
        if (!(max_neighbor_fraction > 0.0 && max_neighbor_fraction <= 1.0)) {
            throw std::invalid_argument("nmesc: need 0 < max_neighbor_fraction <= 1");
        }
        if (fixed_speakers && *fixed_speakers < 1) {
            throw std::invalid_argument("nmesc: fixed_speakers must be >= 1");
        }
    }
};

struct ClusterResult {
    std::vector<int> labels;  // one per embedding row, in [0, estimated_k)
    int estimated_k = 0;
};

namespace detail {

// k-means with k-means++ seeding and a fixed number of restarts; the best
// inertia wins. Fully deterministic under the seed.
inline std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, uint64_t seed,
                               int restarts = 10, int max_iters = 100) {
    const Eigen::Index n = points.rows();
    if (k <= 0 || n == 0) throw std::invalid_argument("kmeans: empty input or k <= 0");
    if (n <= k) {
        std::vector<int> labels(n);
        for (Eigen::Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i);
        return labels;
    }

    Rng rng(seed);
    std::vector<int> best_labels(n, 0);
    double best_inertia = std::numeric_limits<double>::infinity();

    for (int r = 0; r < restarts; ++r) {
        // k-means++ seeding.
        Eigen::MatrixXd centers(k, points.cols());
        centers.row(0) = points.row(rng.uniform_int(0, static_cast<int>(n) - 1));
        Eigen::VectorXd min_d2 =
            (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
        for (int c = 1; c < k; ++c) {
            const double total = min_d2.sum();
            Eigen::Index pick = 0;
            if (total <= 1e-300) {
                pick = rng.uniform_int(0, static_cast<int>(n) - 1);
            } else {
                double target = rng.uniform() * total;
                for (Eigen::Index i = 0; i < n; ++i) {
                    target -= min_d2(i);
                    if (target <= 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
            centers.row(c) = points.row(pick);
            min_d2 = min_d2.cwiseMin(
                (points.rowwise() - centers.row(c)).rowwise().squaredNorm());
        }

        std::vector<int> labels(n, -1);
        for (int iter = 0; iter < max_iters; ++iter) {
            bool changed = false;
            for (Eigen::Index i = 0; i < n; ++i) {
                int best_c = 0;
                double best_d = (points.row(i) - centers.row(0)).squaredNorm();
                for (int c = 1; c < k; ++c) {
                    const double d = (points.row(i) - centers.row(c)).squaredNorm();
                    if (d < best_d) {
                        best_d = d;
                        best_c = c;
                    }
                }
                if (labels[i] != best_c) {
                    labels[i] = best_c;
                    changed = true;
                }
            }
            if (!changed && iter > 0) break;
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
            std::vector<int> counts(k, 0);
            for (Eigen::Index i = 0; i < n; ++i) {
                sums.row(labels[i]) += points.row(i);
                counts[labels[i]] += 1;
            }
            for (int c = 0; c < k; ++c) {
                if (counts[c] > 0) {
                    centers.row(c) = sums.row(c) / counts[c];
                } else {
                    // Re-seed an empty cluster at the point farthest from its center.
                    Eigen::Index far = 0;
                    double far_d = -1.0;
                    for (Eigen::Index i = 0; i < n; ++i) {
                        const double d = (points.row(i) - centers.row(labels[i])).squaredNorm();
                        if (d > far_d) {
                            far_d = d;
                            far = i;
                        }
                    }
                    centers.row(c) = points.row(far);
                }
            }
        }
        // Every cluster must end up non-empty.
        {
            std::vector<int> counts(k, 0);
            for (Eigen::Index i = 0; i < n; ++i) counts[labels[i]] += 1;
            for (int c = 0; c < k; ++c) {
                if (counts[c] > 0) continue;
                Eigen::Index far = -1;
                double far_d = -1.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (counts[labels[i]] <= 1) continue;
                    const double d = (points.row(i) - centers.row(labels[i])).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                if (far >= 0) {
                    counts[labels[far]] -= 1;
                    labels[far] = c;
                    counts[c] = 1;
                }
            }
        }
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            inertia += (points.row(i) - centers.row(labels[i])).squaredNorm();
        }
        if (inertia < best_inertia - 1e-12) {
            best_inertia = inertia;
            best_labels = labels;
        }
    }
    return best_labels;
}

// Row-wise top-p binarization of the affinity (diagonal excluded),
// symmetrized as (B + B^T) / 2.
inline Eigen::MatrixXd binarize_affinity(const Eigen::MatrixXd& affinity, int p) {
    const Eigen::Index n = affinity.rows();
    Eigen::MatrixXd binary = Eigen::MatrixXd::Zero(n, n);
    std::vector<int> order(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        int m = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) order[m++] = static_cast<int>(j);
        }
        const int keep = std::min<int>(p, m);
        std::partial_sort(order.begin(), order.begin() + keep, order.begin() + m,
                          [&](int a, int b) {
                              if (affinity(i, a) != affinity(i, b)) {
                                  return affinity(i, a) > affinity(i, b);
                              }
                              return a < b;
                          });
        for (int j = 0; j < keep; ++j) binary(i, order[j]) = 1.0;
    }
    return 0.5 * (binary + binary.transpose());
}

inline Eigen::VectorXd laplacian_eigenvalues(const Eigen::MatrixXd& weights) {
    Eigen::MatrixXd lap = -weights;
    lap.diagonal() = weights.rowwise().sum() - weights.diagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.compute(lap, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

}  // namespace detail

// Cosine affinity with negatives clipped to 0 (similarities, not signed
// correlations) and unit diagonal.
inline Eigen::MatrixXd affinity_matrix(const EmbeddingSet& emb) {
    Eigen::MatrixXd a = emb.vectors * emb.vectors.transpose();
    if (!a.allFinite()) throw std::invalid_argument("nmesc: NaN in affinity matrix");
    a = a.cwiseMax(0.0).cwiseMin(1.0);
    a.diagonal().setOnes();
    return a;
}

// Auto-tuning spectral clustering. For each candidate neighbor count p the
// affinity is row-binarized, symmetrized, and the unnormalized Laplacian's
// eigengap statistic g(p) computed; the NME ratio (p/n)/g(p) picks p*, whose
// largest eigengap position estimates the speaker count. Rows are then
// embedded in the k smallest eigenvectors and clustered with k-means.
inline ClusterResult nmesc_cluster(const EmbeddingSet& emb, const NmescConfig& cfg = {}) {
    cfg.validate();
    const Eigen::Index n = emb.size();
    if (n < 1) throw std::invalid_argument("nmesc: empty embedding set");
    constexpr double kGapFloor = 1e-10;

    if (n == 1) {
        return {{0}, cfg.fixed_speakers ? std::min<int>(*cfg.fixed_speakers, 1) : 1};
    }

    const Eigen::MatrixXd affinity = affinity_matrix(emb);
    const int p_max = std::max<int>(
        1, std::min<int>(static_cast<int>(std::ceil(n * cfg.max_neighbor_fraction)),
                         static_cast<int>(n) - 1));
    const int max_gaps = std::min<int>(cfg.max_speakers, static_cast<int>(n) - 1);

    int best_p = 1;
    double best_ratio = std::numeric_limits<double>::infinity();
    int best_k = 1;
    for (int p = 1; p <= p_max; ++p) {
        const Eigen::MatrixXd weights = detail::binarize_affinity(affinity, p);
        const Eigen::VectorXd eigs = detail::laplacian_eigenvalues(weights);
        double max_gap = -1.0;
        int arg_k = 1;
        for (int k = 1; k <= max_gaps; ++k) {
            const double gap = eigs(k) - eigs(k - 1);
            if (gap > max_gap + 1e-12) {
                max_gap = gap;
                arg_k = k;
            }
        }
        // The eigengap is normalized by the largest eigenvalue; without this
        // the raw gap keeps growing with p and dense graphs that merge small
        // clusters win the sweep.
        const double normalized_gap = max_gap / std::max(eigs(n - 1), kGapFloor);
        const double ratio = (static_cast<double>(p) / static_cast<double>(n)) /
                             std::max(normalized_gap, kGapFloor);
        if (ratio < best_ratio - 1e-12) {
            best_ratio = ratio;
            best_p = p;
            best_k = arg_k;
        }
    }

    int k = cfg.fixed_speakers ? *cfg.fixed_speakers : best_k;
    if (k >= n) {
        ClusterResult r;
        r.estimated_k = static_cast<int>(n);
        r.labels.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) r.labels[i] = static_cast<int>(i);
        return r;
    }

    const Eigen::MatrixXd weights = detail::binarize_affinity(affinity, best_p);
    Eigen::MatrixXd lap = -weights;
    lap.diagonal() = weights.rowwise().sum() - weights.diagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    const Eigen::MatrixXd spectral = solver.eigenvectors().leftCols(k);

    ClusterResult result;
    result.estimated_k = k;
    result.labels = detail::kmeans(spectral, k, cfg.kmeans_seed);
    return result;
}

// Challenge speaker-count prior: a session whose overlap ratio exceeds the
// rule threshold is taken to have the maximum speaker count; otherwise the
// NMESC estimate applies, capped at the maximum.
inline int decide_speaker_count(int nmesc_k, double ratio, const NmescConfig& cfg = {}) {
    cfg.validate();
    if (nmesc_k < 1) throw std::invalid_argument("decide_speaker_count: nmesc_k must be >= 1");
    if (ratio > cfg.overlap_ratio_rule_threshold) return cfg.max_speakers;
    return std::min(nmesc_k, cfg.max_speakers);
}

}  // namespace diarkit
