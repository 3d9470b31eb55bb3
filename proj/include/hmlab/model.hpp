// model.hpp — hierarchical multi-index targets: link functions, coefficient
// profiles, planted weights.
//
// Hermite convention (used everywhere in this library): probabilists' basis
// with
//     g(z) = sum_k c_k * He_k(z) / k!,   equivalently   c_k = E[g(z) He_k(z)].
// Under this convention Parseval reads E[g^2] = sum_k c_k^2 / k!, and c_2
// equals E[g''(z)] by Gaussian integration by parts. Figure-style raw
// expansions ("a*He_2 + b*He_4") therefore carry c_2 = 2! a, c_4 = 4! b.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hmlab/core.hpp"
#include "hmlab/numerics.hpp"

namespace hmlab::model {

enum class LinkKind { hermite_series, polynomial, custom_even };

class LinkFunction {
  public:
    LinkKind kind = LinkKind::custom_even;
    std::string name;
    // c_k with g = sum c_k He_k/k!; empty for custom links until computed.
    std::vector<double> hermite_c;

    double operator()(double z) const { return eval_(z); }

    // g built from Hermite coefficients c_k (coefficient of He_k/k!).
    static LinkFunction from_hermite(std::vector<double> c, std::string name) {
        LinkFunction g;
        g.kind = LinkKind::hermite_series;
        g.name = std::move(name);
        g.hermite_c = c;
        g.eval_ = [c = std::move(c)](double z) {
            double hm = 1.0, h = z, fact = 1.0;
            double acc = c.empty() ? 0.0 : c[0]; // He_0 = 1
            for (std::size_t k = 1; k < c.size(); ++k) {
                fact *= static_cast<double>(k);
                acc += c[k] * h / fact;
                const double hn = z * h - static_cast<double>(k) * hm;
                hm = h;
                h = hn;
            }
            return acc;
        };
        return g;
    }

    // g(z) = sum_j coeffs[j] z^j (monomial coefficients).
    static LinkFunction polynomial(std::vector<double> coeffs, std::string name) {
        LinkFunction g;
        g.kind = LinkKind::polynomial;
        g.name = std::move(name);
        g.eval_ = [coeffs = std::move(coeffs)](double z) {
            double acc = 0.0;
            for (std::size_t j = coeffs.size(); j-- > 0;) acc = acc * z + coeffs[j];
            return acc;
        };
        return g;
    }

    static LinkFunction custom(std::function<double(double)> f, std::string name) {
        LinkFunction g;
        g.kind = LinkKind::custom_even;
        g.name = std::move(name);
        g.eval_ = std::move(f);
        return g;
    }

  private:
    std::function<double(double)> eval_;
};

// ── Built-in presets ─────────────────────────────────────────────────────
// he2:      g = He_2/2           (c_2 = 1)
// he2_he4:  g = He_2/2 + He_4/48 (c_2 = 1, c_4 = 1/2)
// tanh_sq:  g = tanh^2(z) - E[tanh^2], a bounded non-polynomial even link
inline LinkFunction link_he2() {
    return LinkFunction::from_hermite({0.0, 0.0, 1.0}, "he2");
}

inline LinkFunction link_he2_he4() {
    return LinkFunction::from_hermite({0.0, 0.0, 1.0, 0.0, 0.5}, "he2_he4");
}

inline LinkFunction link_tanh_sq() {
    static const double mean = [] {
        const auto& q = numerics::gauss_hermite(128);
        return q.integrate([](double z) { return std::tanh(z) * std::tanh(z); });
    }();
    LinkFunction g = LinkFunction::custom(
        [](double z) { return std::tanh(z) * std::tanh(z) - mean; }, "tanh_sq");
    return g;
}

inline LinkFunction link_preset(const std::string& name) {
    if (name == "he2") return link_he2();
    if (name == "he2_he4") return link_he2_he4();
    if (name == "tanh_sq") return link_tanh_sq();
    throw ValidationError("unknown link preset: " + name);
}

// ── Hermite analysis ─────────────────────────────────────────────────────
// c_j = E[g He_j] for j = 0..max_order, by Gauss-Hermite quadrature with
// >= 2*max_order + 32 nodes. Two node counts must agree to 1e-6.
inline std::vector<double> hermite_coefficients_of(const LinkFunction& g,
                                                   int max_order) {
    if (max_order < 0) throw ValidationError("hermite_coefficients_of: order < 0");
    const int n1 = std::min(512, std::max(128, 2 * max_order + 32));
    const int n2 = std::min(512, n1 + 64);

    auto compute = [&](int nn) {
        const auto& q = numerics::gauss_hermite(nn);
        std::vector<double> c(static_cast<std::size_t>(max_order) + 1, 0.0);
        std::vector<double> he;
        std::vector<KahanSum> acc(c.size());
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            numerics::hermite_he_all(max_order, q.nodes[i], he);
            const double wg = q.weights[i] * g(q.nodes[i]);
            for (std::size_t j = 0; j < c.size(); ++j) acc[j].add(wg * he[j]);
        }
        for (std::size_t j = 0; j < c.size(); ++j) c[j] = acc[j].value();
        return c;
    };

    const auto ca = compute(n1);
    const auto cb = compute(n2);
    for (std::size_t j = 0; j < ca.size(); ++j)
        if (std::abs(ca[j] - cb[j]) > 1e-6)
            throw NumericalError("hermite_coefficients_of: quadrature did not "
                                 "converge at order " +
                                 std::to_string(j));
    return cb;
}

inline double link_second_moment(const LinkFunction& g, int nodes = 128) {
    const auto& q = numerics::gauss_hermite(nodes);
    return q.integrate([&](double z) { return g(z) * g(z); });
}

// E[g''] = c_2 under the module convention; computed by quadrature against
// He_2 so it also works for custom links.
inline double link_mean_curvature(const LinkFunction& g, int nodes = 128) {
    const auto& q = numerics::gauss_hermite(nodes);
    return q.integrate([&](double z) { return g(z) * (z * z - 1.0); });
}

// ── Link validation (callable, not enforced at construction) ─────────────
struct LinkCheck {
    bool even_ok = false;
    bool centered_ok = false;
    bool second_moment_ok = false;
    bool curvature_ok = false;
    double mean = 0.0;
    double second_moment = 0.0;
    double mean_curvature = 0.0;

    bool all_ok() const {
        return even_ok && centered_ok && second_moment_ok && curvature_ok;
    }
};

inline LinkCheck check_link_assumptions(const LinkFunction& g, double lower_d = 0.05,
                                        double upper_c = 50.0) {
    LinkCheck out;
    out.even_ok = true;
    for (int i = 0; i < 64; ++i) {
        const double z = -5.0 + 10.0 * i / 63.0;
        if (std::abs(g(z) - g(-z)) > 1e-10) {
            out.even_ok = false;
            break;
        }
    }
    const auto& q = numerics::gauss_hermite(64);
    out.mean = q.integrate(g);
    out.centered_ok = std::abs(out.mean) <= 1e-8;
    out.second_moment = link_second_moment(g);
    out.second_moment_ok =
        out.second_moment > lower_d && out.second_moment < upper_c;
    out.mean_curvature = link_mean_curvature(g);
    out.curvature_ok =
        std::abs(out.mean_curvature) > lower_d && std::abs(out.mean_curvature) < upper_c;
    return out;
}

// ── Target specification ─────────────────────────────────────────────────
struct TargetSpec {
    std::size_t m_star = 1;
    double gamma = 1.0;
    std::vector<LinkFunction> links; // one per index
    std::vector<double> a_star;      // strictly decreasing, sum of squares 1
    double noise_delta = 0.0;
    std::size_t dim_d = 1;
    double crossover_alpha = 1.0; // m_star^{2 gamma}, the scarce/rich scale

    const LinkFunction& link(std::size_t k) const { return links[k]; }

    double target_variance() const {
        KahanSum s;
        for (std::size_t k = 0; k < m_star; ++k)
            s.add(a_star[k] * a_star[k] * link_second_moment(links[k]));
        return s.value();
    }

    std::uint64_t fingerprint() const {
        Fnv1a h;
        h.update(static_cast<std::uint64_t>(m_star));
        h.update(gamma);
        h.update(noise_delta);
        h.update(static_cast<std::uint64_t>(dim_d));
        for (const auto& g : links) h.update(g.name);
        for (double a : a_star) h.update(a);
        return h.digest();
    }
};

inline TargetSpec make_scale_free_target(std::size_t m_star, double gamma,
                                         const LinkFunction& link, double delta,
                                         std::size_t d) {
    if (m_star < 1) throw ValidationError("make_scale_free_target: m_star >= 1");
    if (!(gamma > 0.0)) throw ValidationError("make_scale_free_target: gamma > 0");
    if (delta < 0.0) throw ValidationError("make_scale_free_target: delta >= 0");
    if (m_star > d) throw ValidationError("make_scale_free_target: m_star <= d");

    TargetSpec spec;
    spec.m_star = m_star;
    spec.gamma = gamma;
    spec.noise_delta = delta;
    spec.dim_d = d;
    spec.links.assign(m_star, link);
    spec.crossover_alpha = std::pow(static_cast<double>(m_star), 2.0 * gamma);

    // a_k proportional to k^{-gamma}; normalization via compensated sums so
    // sum a_k^2 = 1 holds to 1e-12 even at m_star = 1e4. (For gamma < 1/2
    // the m_star^{gamma-1/2} prefactor cancels in the normalization.)
    spec.a_star.resize(m_star);
    KahanSum ss;
    for (std::size_t k = 0; k < m_star; ++k) {
        const double w = std::pow(static_cast<double>(k + 1), -gamma);
        spec.a_star[k] = w;
        ss.add(w * w);
    }
    const double inv = 1.0 / std::sqrt(ss.value());
    for (double& a : spec.a_star) a *= inv;
    return spec;
}

// Diagnostic constructor with explicit coefficients; only shape checks, so
// tests can probe deliberately invalid profiles (e.g. a_k = 0).
inline TargetSpec make_target_with_coefficients(std::vector<double> a,
                                                std::vector<LinkFunction> links,
                                                double gamma, double delta,
                                                std::size_t d) {
    if (a.size() != links.size() || a.empty())
        throw ValidationError("make_target_with_coefficients: size mismatch");
    if (a.size() > d) throw ValidationError("make_target_with_coefficients: m <= d");
    TargetSpec spec;
    spec.m_star = a.size();
    spec.gamma = gamma;
    spec.noise_delta = delta;
    spec.dim_d = d;
    spec.links = std::move(links);
    spec.a_star = std::move(a);
    spec.crossover_alpha = std::pow(static_cast<double>(spec.m_star), 2.0 * gamma);
    return spec;
}

// ── Planted weights ──────────────────────────────────────────────────────
struct PlantedWeights {
    Matrix w_star; // m_star x d, rows orthogonal with ||w_k||^2 = d

    std::size_t m() const { return w_star.rows(); }
    std::size_t d() const { return w_star.cols(); }
    const double* row(std::size_t k) const { return w_star.row(k); }
};

inline void validate_planted(const PlantedWeights& w) {
    const double d = static_cast<double>(w.d());
    for (std::size_t i = 0; i < w.m(); ++i) {
        if (std::abs(norm2_sq(w.row(i), w.d()) - d) > 1e-8 * d)
            throw ValidationError("planted weights: row norm^2 != d");
        for (std::size_t j = i + 1; j < w.m(); ++j)
            if (std::abs(dot(w.row(i), w.row(j), w.d())) > 1e-8 * d)
                throw ValidationError("planted weights: rows not orthogonal");
    }
}

// f*(x) = sum_k a_k g_k(<w_k, x>); deterministic and noise-free.
inline double evaluate_target(const TargetSpec& spec, const PlantedWeights& w,
                              const double* x, std::size_t len) {
    if (len != spec.dim_d || w.d() != spec.dim_d || w.m() != spec.m_star)
        throw ValidationError("evaluate_target: dimension mismatch");
    KahanSum s;
    for (std::size_t k = 0; k < spec.m_star; ++k)
        s.add(spec.a_star[k] * spec.links[k](dot(w.row(k), x, len)));
    return s.value();
}

inline double evaluate_target(const TargetSpec& spec, const PlantedWeights& w,
                              const std::vector<double>& x) {
    return evaluate_target(spec, w, x.data(), x.size());
}

// ── Plain-text config block round trip ───────────────────────────────────
// target { gamma = ...  m_star = ...  d = ...  delta = ...  link = ... }
inline std::string to_config_block(const TargetSpec& spec) {
    if (spec.links.empty() || spec.links.front().name.empty())
        throw ValidationError("to_config_block: link has no preset name");
    for (const auto& g : spec.links)
        if (g.name != spec.links.front().name)
            throw ValidationError("to_config_block: mixed links not serializable");
    std::ostringstream os;
    os.precision(17);
    os << "target {\n";
    os << "  gamma = " << spec.gamma << "\n";
    os << "  m_star = " << spec.m_star << "\n";
    os << "  d = " << spec.dim_d << "\n";
    os << "  delta = " << spec.noise_delta << "\n";
    os << "  link = " << spec.links.front().name << "\n";
    os << "}\n";
    return os.str();
}

} // namespace hmlab::model
