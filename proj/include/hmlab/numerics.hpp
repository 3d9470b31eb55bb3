// numerics.hpp — shared numerical kernels: probabilists' Hermite polynomials,
// Gauss-Hermite / Gauss-Legendre quadrature (Golub-Welsch), dense symmetric
// eigendecomposition (Householder tridiagonalization + implicit-shift QL),
// bracketed root finding, grid-seeded 1-D maximization, and modified
// Gram-Schmidt row orthonormalization.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include "hmlab/core.hpp"

namespace hmlab::numerics {

// ── Probabilists' Hermite polynomials He_k ───────────────────────────────
// He_0 = 1, He_1 = z, He_{k+1}(z) = z He_k(z) - k He_{k-1}(z).
// Orthogonality: E_{z~N(0,1)}[He_j He_k] = k! δ_{jk}.
inline double hermite_he(int k, double z) {
    if (k == 0) return 1.0;
    double hm = 1.0, h = z;
    for (int j = 1; j < k; ++j) {
        const double hn = z * h - static_cast<double>(j) * hm;
        hm = h;
        h = hn;
    }
    return h;
}

// He_0..He_K at one point.
inline void hermite_he_all(int max_order, double z, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(max_order) + 1);
    out[0] = 1.0;
    if (max_order >= 1) out[1] = z;
    for (int j = 1; j < max_order; ++j)
        out[j + 1] = z * out[j] - static_cast<double>(j) * out[j - 1];
}

// ── Quadrature rules ─────────────────────────────────────────────────────
enum class QuadratureKind { gauss_hermite_probabilist, gauss_legendre };

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    QuadratureKind kind = QuadratureKind::gauss_hermite_probabilist;

    template <typename F>
    double integrate(F&& f) const {
        KahanSum s;
        for (std::size_t i = 0; i < nodes.size(); ++i) s.add(weights[i] * f(nodes[i]));
        return s.value();
    }
};

namespace detail {

// Implicit-shift QL on a symmetric tridiagonal matrix. d holds the diagonal
// (eigenvalues on exit), e the subdiagonal (destroyed). vecs, when non-null,
// is a row-major matrix whose ROWS are combined by the plane rotations; seed
// it with Q^T from the Householder reduction (or a 1-column matrix to track
// only first components for Golub-Welsch weights).
inline void tql2(std::vector<double>& d, std::vector<double>& e, Matrix* vecs) {
    const std::size_t n = d.size();
    if (n == 0) return;
    e.resize(n);
    e[n - 1] = 0.0;

    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) + dd == dd) break;
            }
            if (m != l) {
                if (iter++ == 50)
                    throw NumericalError("tql2: no convergence in 50 iterations");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (std::size_t ii = m; ii-- > l;) {
                    double f = s * e[ii];
                    const double b = c * e[ii];
                    r = std::hypot(f, g);
                    e[ii + 1] = r;
                    if (r == 0.0) {
                        d[ii + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[ii + 1] - p;
                    r = (d[ii] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[ii + 1] = g + p;
                    g = c * r - b;
                    if (vecs) {
                        double* vi = vecs->row(ii);
                        double* vj = vecs->row(ii + 1);
                        const std::size_t w = vecs->cols();
                        for (std::size_t k = 0; k < w; ++k) {
                            f = vj[k];
                            vj[k] = s * vi[k] + c * f;
                            vi[k] = c * vi[k] - s * f;
                        }
                    }
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

// Householder reduction of a symmetric matrix to tridiagonal form.
// On exit a holds the accumulated transform Q (column convention as usual);
// d the diagonal, e the subdiagonal shifted so e[0..n-2] are the
// off-diagonal entries.
inline void tred2(Matrix& a, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = a.rows();
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    if (n == 1) {
        d[0] = a(0, 0);
        a(0, 0) = 1.0;
        return;
    }

    for (std::size_t i = n - 1; i >= 1; --i) {
        const std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(a(i, k));
            if (scale == 0.0) {
                e[i] = a(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    a(i, k) /= scale;
                    h += a(i, k) * a(i, k);
                }
                double f = a(i, l);
                double g = (f >= 0.0 ? -std::sqrt(h) : std::sqrt(h));
                e[i] = scale * g;
                h -= f * g;
                a(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    a(j, i) = a(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
                    e[j] = g / h;
                    f += e[j] * a(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = a(i, j);
                    g = e[j] - hh * f;
                    e[j] = g;
                    for (std::size_t k = 0; k <= j; ++k)
                        a(j, k) -= (f * e[k] + g * a(i, k));
                }
            }
        } else {
            e[i] = a(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k < i; ++k) g += a(i, k) * a(k, j);
                for (std::size_t k = 0; k < i; ++k) a(k, j) -= g * a(k, i);
            }
        }
        d[i] = a(i, i);
        a(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) a(j, i) = a(i, j) = 0.0;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = e[i + 1];
    e[n - 1] = 0.0;
}

} // namespace detail

// ── Symmetric eigendecomposition ─────────────────────────────────────────
// Eigenvalues descending; `vectors` column j pairs with eigenvalue j.
// Sign convention: the largest-magnitude entry of each eigenvector is
// positive (first such index on ties), which keeps golden files stable.
struct EigenDecomposition {
    std::vector<double> eigenvalues;
    Matrix vectors;

    // Copy of eigenvector j as a flat vector.
    std::vector<double> eigenvector(std::size_t j) const {
        std::vector<double> v(vectors.rows());
        for (std::size_t i = 0; i < vectors.rows(); ++i) v[i] = vectors(i, j);
        return v;
    }
};

inline EigenDecomposition sym_eig(const Matrix& a_in) {
    const std::size_t n = a_in.rows();
    if (n == 0 || a_in.cols() != n)
        throw ValidationError("sym_eig: matrix must be square and non-empty");

    double max_abs = 0.0, max_asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            max_abs = std::max(max_abs, std::abs(a_in(i, j)));
            max_asym = std::max(max_asym, std::abs(a_in(i, j) - a_in(j, i)));
        }
    if (max_asym > 1e-10 * std::max(1.0, max_abs))
        throw ValidationError("sym_eig: input is not symmetric");

    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (a_in(i, j) + a_in(j, i));

    std::vector<double> d, e;
    detail::tred2(a, d, e);

    // Row-layout Q^T so QL rotations touch contiguous memory.
    Matrix qt(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) qt(i, j) = a(j, i);
    detail::tql2(d, e, &qt);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (d[x] != d[y]) return d[x] > d[y];
        return x < y;
    });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.eigenvalues[j] = d[src];
        const double* v = qt.row(src);
        std::size_t imax = 0;
        double amax = -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(v[i]) > amax) {
                amax = std::abs(v[i]);
                imax = i;
            }
        const double sgn = (v[imax] < 0.0) ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = sgn * v[i];
    }
    return out;
}

// ── Golub-Welsch quadrature construction ─────────────────────────────────
namespace detail {

inline QuadratureRule golub_welsch(std::vector<double> diag, std::vector<double> off,
                                   double total_mass, QuadratureKind kind) {
    const std::size_t n = diag.size();
    Matrix first(n, 1);
    for (std::size_t i = 0; i < n; ++i) first(i, 0) = 0.0;
    // tql2 wants rows = eigenvectors of the tridiagonal matrix; seeding with
    // the identity restricted to the first coordinate tracks v_j[0] only.
    // Rows here are the transported unit vectors, so start from e_0^T laid
    // out across rows: first(i,0) = (i == 0).
    first(0, 0) = 1.0;
    std::vector<double> e(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = off[i];
    tql2(diag, e, &first);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return diag[a] < diag[b]; });

    QuadratureRule rule;
    rule.kind = kind;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        rule.nodes[j] = diag[order[j]];
        const double v0 = first(order[j], 0);
        rule.weights[j] = total_mass * v0 * v0;
    }
    return rule;
}

template <typename Maker>
const QuadratureRule& cached_rule(std::map<int, QuadratureRule>& cache, std::mutex& mu,
                                  int n, Maker&& make) {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make(n)).first;
    return it->second;
}

} // namespace detail

// Gauss-Hermite with the probabilists' weight N(0,1): integrates
// E_{z~N(0,1)}[f(z)] exactly for polynomials of degree <= 2n-1.
inline const QuadratureRule& gauss_hermite(int n_nodes) {
    if (n_nodes < 2 || n_nodes > 512)
        throw ValidationError("gauss_hermite: node count must be in [2, 512]");
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    return detail::cached_rule(cache, mu, n_nodes, [](int n) {
        std::vector<double> diag(n, 0.0), off(n, 0.0);
        for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
        return detail::golub_welsch(std::move(diag), std::move(off), 1.0,
                                    QuadratureKind::gauss_hermite_probabilist);
    });
}

// Gauss-Legendre on [-1, 1] with unit weight (total mass 2).
inline const QuadratureRule& gauss_legendre(int n_nodes) {
    if (n_nodes < 2 || n_nodes > 512)
        throw ValidationError("gauss_legendre: node count must be in [2, 512]");
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    return detail::cached_rule(cache, mu, n_nodes, [](int n) {
        std::vector<double> diag(n, 0.0), off(n, 0.0);
        for (int k = 1; k < n; ++k)
            off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
        return detail::golub_welsch(std::move(diag), std::move(off), 2.0,
                                    QuadratureKind::gauss_legendre);
    });
}

// ── Scalar root finding and maximization ─────────────────────────────────

// Bisection with secant acceleration. Requires a sign change on [lo, hi];
// stops when |f| <= tol or the bracket is below tol*max(1,|x|).
inline double find_root_bracketed(const std::function<double(double)>& f, double lo,
                                  double hi, double tol) {
    if (!(lo < hi)) throw ValidationError("find_root_bracketed: requires lo < hi");
    double flo = f(lo), fhi = f(hi);
    if (std::isnan(flo) || std::isnan(fhi))
        throw NumericalError("find_root_bracketed: NaN at bracket endpoint");
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (flo * fhi > 0.0)
        throw ValidationError("find_root_bracketed: no sign change on bracket");

    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        // secant proposal from the current bracket, guarded by bisection
        double xs = (fhi != flo) ? (lo - flo * (hi - lo) / (fhi - flo)) : x;
        const double margin = 0.01 * (hi - lo);
        if (!(xs > lo + margin && xs < hi - margin)) xs = 0.5 * (lo + hi);
        x = xs;
        const double fx = f(x);
        if (std::isnan(fx)) throw NumericalError("find_root_bracketed: NaN from f");
        if (std::abs(fx) <= tol) return x;
        if (flo * fx < 0.0) {
            hi = x;
            fhi = fx;
        } else {
            lo = x;
            flo = fx;
        }
        if (hi - lo <= tol * std::max(1.0, std::abs(x))) return 0.5 * (lo + hi);
    }
    return x;
}

struct MaximizeResult {
    double argmax = 0.0;
    double max = 0.0;
};

// Grid scan (1024 points) then golden-section refinement between the grid
// neighbours of the best point. The scan makes the search robust to
// bimodal objectives at grid resolution.
inline MaximizeResult maximize_1d(const std::function<double(double)>& f, double lo,
                                  double hi, double tol, int grid_points = 1024) {
    if (!(lo < hi)) throw ValidationError("maximize_1d: requires lo < hi");
    const int n = std::max(grid_points, 8);
    double best_x = lo, best_f = -std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < n; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
        const double fx = f(x);
        if (std::isnan(fx)) throw NumericalError("maximize_1d: NaN from objective");
        if (fx > best_f) {
            best_f = fx;
            best_x = x;
            best_i = i;
        }
    }
    double a = lo + (hi - lo) * static_cast<double>(std::max(best_i - 1, 0)) / (n - 1);
    double b = lo + (hi - lo) * static_cast<double>(std::min(best_i + 1, n - 1)) / (n - 1);

    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
        if (std::isnan(f1) || std::isnan(f2))
            throw NumericalError("maximize_1d: NaN from objective");
    }
    const double xm = 0.5 * (a + b);
    const double fm = f(xm);
    MaximizeResult res{xm, fm};
    if (best_f > fm) res = {best_x, best_f};
    return res;
}

// ── Row orthonormalization ───────────────────────────────────────────────
// Modified Gram-Schmidt with one re-orthogonalization pass; every output
// row has squared norm `scale` and rows are pairwise orthogonal.
inline Matrix orthonormalize_rows(const Matrix& m, double scale) {
    const std::size_t k = m.rows(), d = m.cols();
    if (k > d) throw ValidationError("orthonormalize_rows: more rows than columns");
    if (!(scale > 0.0)) throw ValidationError("orthonormalize_rows: scale must be > 0");
    Matrix q = m;
    for (std::size_t i = 0; i < k; ++i) {
        double* qi = q.row(i);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < i; ++j) {
                const double* qj = q.row(j);
                const double proj = dot(qi, qj, d) / scale;
                for (std::size_t c = 0; c < d; ++c) qi[c] -= proj * qj[c];
            }
        }
        const double nrm = std::sqrt(norm2_sq(qi, d));
        const double ref = std::sqrt(norm2_sq(m.row(i), d));
        if (nrm < 1e-12 * std::max(1.0, ref))
            throw ValidationError("orthonormalize_rows: rank-deficient input");
        const double fac = std::sqrt(scale) / nrm;
        for (std::size_t c = 0; c < d; ++c) qi[c] *= fac;
    }
    return q;
}

// ── Normal quantile (Wichura AS241, ~1e-15 accuracy) ─────────────────────
// Used to map low-discrepancy uniforms to gaussian points.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ValidationError("normal_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) *
                        r +
                    4.5921953931549871457e+4) *
                       r +
                   1.3731693765509461125e+4) *
                      r +
                  1.9715909503065514427e+3) *
                     r +
                 1.3314166789178437745e+2) *
                    r +
                3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) *
                        r +
                    2.1213794301586595867e+4) *
                       r +
                   5.3941960214247511077e+3) *
                      r +
                  6.8718700749205790830e+2) *
                     r +
                 4.2313330701600911252e+1) *
                    r +
                1.0);
    }
    r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) *
                       r +
                   1.27045825245236838258e+0) *
                      r +
                  3.64784832476320460504e+0) *
                     r +
                 5.76949722146069140550e+0) *
                    r +
                4.63033784615654529590e+0) *
                   r +
               1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) *
                       r +
                   1.48103976427480074590e-1) *
                      r +
                  6.89767334985100004550e-1) *
                     r +
                 1.67638483018380384940e+0) *
                    r +
                2.05319162663775882187e+0) *
                   r +
               1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) *
                       r +
                   2.65321895265761230930e-2) *
                      r +
                  2.96560571828504891230e-1) *
                     r +
                 1.78482653991729133580e+0) *
                    r +
                5.46378491116411436990e+0) *
                   r +
               6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) *
                       r +
                   7.86869131145613259100e-4) *
                      r +
                  1.48753612908506148525e-2) *
                     r +
                 1.36929880922735805310e-1) *
                    r +
                5.99832206555887937690e-1) *
                   r +
               1.0);
    }
    return (q < 0.0) ? -val : val;
}

} // namespace hmlab::numerics
