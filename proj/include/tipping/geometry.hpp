// Embedding vectors, dot-product algebra, realization of vector sets from
// prescribed Gram matrices, and orthogonal padding directions.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tipping/errors.hpp"

namespace tipping {

// One token's position in embedding space. Dimensionless components;
// a Scenario keeps all of its embeddings at one dimension.
using Embedding = std::vector<double>;

inline constexpr double kGramSymmetryTol = 1e-9;
inline constexpr double kGramEigenvalueTol = 1e-9;
inline constexpr double kPadDependencyTol = 1e-9;

inline bool all_finite(const Embedding& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
}

/// Plain Euclidean inner product. Both arguments must have equal dimension.
inline double dot(const Embedding& u, const Embedding& v) {
    if (u.size() != v.size()) {
        throw ValidationError("dot: dimension mismatch (" +
                              std::to_string(u.size()) + " vs " +
                              std::to_string(v.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        acc += u[k] * v[k];
    }
    return acc;
}

inline double norm_squared(const Embedding& v) { return dot(v, v); }

/// Pairwise target dot products for a set of k vectors, row-major k-by-k.
struct GramMatrix {
    std::size_t size = 0;
    std::vector<double> entries;  // size*size, row-major

    GramMatrix() = default;
    explicit GramMatrix(std::size_t k) : size(k), entries(k * k, 0.0) {}
    explicit GramMatrix(const std::vector<std::vector<double>>& rows) {
        size = rows.size();
        entries.resize(size * size);
        for (std::size_t i = 0; i < size; ++i) {
            if (rows[i].size() != size) {
                throw ValidationError("gram", "row " + std::to_string(i) +
                                                  " has length " +
                                                  std::to_string(rows[i].size()) +
                                                  ", expected " +
                                                  std::to_string(size));
            }
            for (std::size_t j = 0; j < size; ++j) {
                entries[i * size + j] = rows[i][j];
            }
        }
    }

    double& at(std::size_t i, std::size_t j) { return entries[i * size + j]; }
    double at(std::size_t i, std::size_t j) const {
        return entries[i * size + j];
    }
};

namespace detail {

// Cyclic Jacobi eigendecomposition for small symmetric matrices.
// a is overwritten with a diagonal matrix; v accumulates the rotations so
// that original = v * diag * v^T. Deterministic: fixed sweep order.
inline void jacobi_eigen_symmetric(std::vector<double>& a,
                                   std::vector<double>& v, std::size_t n) {
    v.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    if (n < 2) return;

    double scale = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::fabs(a[i]));
    if (scale == 0.0) return;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (std::sqrt(off) <= 1e-15 * scale * static_cast<double>(n)) break;

        for (std::size_t p = 0; p < n - 1; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::fabs(apq) <= 1e-18 * scale) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                // smaller-magnitude root of t^2 + 2*theta*t - 1 = 0
                double t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

}  // namespace detail

/// Realizes a symmetric PSD Gram matrix as k vectors of dimension k whose
/// pairwise dot products reproduce the requested entries. Eigenvalues in
/// [-kGramEigenvalueTol, 0) are clamped to zero; anything more negative is
/// rejected. Output is deterministic: eigenpairs sorted by descending
/// eigenvalue and each eigenvector's first nonzero component made positive.
inline std::vector<Embedding> vectors_from_gram(const GramMatrix& gram) {
    const std::size_t k = gram.size;
    if (k == 0) throw ValidationError("gram", "empty matrix");
    for (std::size_t i = 0; i < k * k; ++i) {
        if (!std::isfinite(gram.entries[i])) {
            throw ValidationError("gram", "non-finite entry");
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            if (std::fabs(gram.at(i, j) - gram.at(j, i)) > kGramSymmetryTol) {
                throw ValidationError(
                    "gram", "not symmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
            }
        }
    }

    // Work on the symmetrized copy so tiny asymmetries within tolerance
    // cannot leak into the decomposition.
    std::vector<double> a(k * k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            a[i * k + j] = 0.5 * (gram.at(i, j) + gram.at(j, i));

    std::vector<double> v;
    detail::jacobi_eigen_symmetric(a, v, k);

    std::vector<std::size_t> order(k);
    for (std::size_t i = 0; i < k; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return a[x * k + x] > a[y * k + y];
    });

    std::vector<double> eigenvalues(k);
    for (std::size_t c = 0; c < k; ++c) eigenvalues[c] = a[order[c] * k + order[c]];

    for (double lambda : eigenvalues) {
        if (lambda < -kGramEigenvalueTol) {
            throw NotRealizableError(
                "gram matrix is not positive semidefinite: eigenvalue " +
                    std::to_string(lambda),
                lambda);
        }
    }

    // rows of V * sqrt(Lambda) are the realized vectors
    std::vector<Embedding> out(k, Embedding(k, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t src = order[c];
        double sign = 1.0;
        for (std::size_t r = 0; r < k; ++r) {
            const double x = v[r * k + src];
            if (x != 0.0) {
                sign = (x > 0.0) ? 1.0 : -1.0;
                break;
            }
        }
        const double root = std::sqrt(std::max(eigenvalues[c], 0.0));
        for (std::size_t r = 0; r < k; ++r) {
            out[r][c] = sign * v[r * k + src] * root;
        }
    }
    return out;
}

/// Builds `count` mutually orthogonal vectors of length `norm`, each
/// orthogonal to every vector in `existing`. Candidates are the canonical
/// basis directions in order, projected off the existing span
/// (Gram-Schmidt with one re-orthogonalization pass); candidates whose
/// residual norm falls below kPadDependencyTol are skipped.
inline std::vector<Embedding> orthogonal_pad(
    const std::vector<Embedding>& existing, std::size_t count, double norm) {
    if (count < 1) throw ValidationError("orthogonal_pad: count must be >= 1");
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw ValidationError("orthogonal_pad: norm must be positive");
    }
    if (existing.empty()) {
        throw ValidationError("orthogonal_pad: existing set must be non-empty");
    }
    const std::size_t d = existing.front().size();
    for (const auto& e : existing) {
        if (e.size() != d) throw ValidationError("orthogonal_pad: dimension mismatch");
        if (!all_finite(e)) throw ValidationError("orthogonal_pad: non-finite input");
    }

    // Orthonormal basis of span(existing) plus accepted pad directions.
    std::vector<Embedding> basis;
    auto project_off = [&](Embedding r) {
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                const double c = dot(r, b);
                for (std::size_t i = 0; i < d; ++i) r[i] -= c * b[i];
            }
        }
        return r;
    };
    auto try_extend = [&](const Embedding& candidate) -> bool {
        Embedding r = project_off(candidate);
        const double len = std::sqrt(norm_squared(r));
        if (len < kPadDependencyTol) return false;
        for (auto& x : r) x /= len;
        basis.push_back(std::move(r));
        return true;
    };

    for (const auto& e : existing) try_extend(e);
    const std::size_t span_dim = basis.size();

    std::vector<Embedding> pads;
    for (std::size_t axis = 0; axis < d && pads.size() < count; ++axis) {
        Embedding candidate(d, 0.0);
        candidate[axis] = 1.0;
        if (try_extend(candidate)) {
            Embedding pad = basis.back();
            for (auto& x : pad) x *= norm;
            pads.push_back(std::move(pad));
        }
    }
    if (pads.size() < count) {
        throw CapacityError(
            "orthogonal_pad: only " + std::to_string(pads.size()) +
            " orthogonal directions available beyond the existing span (dim " +
            std::to_string(span_dim) + " of " + std::to_string(d) +
            "), requested " + std::to_string(count));
    }
    return pads;
}

}  // namespace tipping
