#include "edts/moo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace edts::moo {

double riesz_energy(const std::vector<Vec>& points, double s)
{
    double e = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < points[i].size(); ++k) {
                double d = points[i][k] - points[j][k];
                d2 += d * d;
            }
            e += std::pow(d2, -s / 2.0);
        }
    }
    return e;
}

Vec project_to_simplex(const Vec& v)
{
    Vec u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cum += u[i];
        double t = (cum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) theta = t;
    }
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
    // remove rounding drift so the sum is 1 to the last bits
    double sum = std::accumulate(out.begin(), out.end(), 0.0);
    for (auto& x : out) x /= sum;
    return out;
}

ReferenceDirections s_energy_directions(std::size_t m, std::size_t count, std::uint64_t seed,
                                        std::size_t max_iterations)
{
    if (m < 2) throw std::invalid_argument("s_energy_directions: need at least two objectives");
    if (count < m) throw std::invalid_argument("s_energy_directions: count must be at least the objective count");

    ReferenceDirections out;
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < m; ++i) {
        Vec e(m, 0.0);
        e[i] = 1.0;
        pts.push_back(e);
    }
    Rng rng(derive_seed(seed, 0x656e6572ULL));
    for (std::size_t i = m; i < count; ++i) {
        Vec z(m);
        for (auto& x : z) x = rng.exponential(1.0);
        double sum = std::accumulate(z.begin(), z.end(), 0.0);
        for (auto& x : z) x /= sum;
        pts.push_back(z);
    }

    const double s = static_cast<double>(m);
    double energy = riesz_energy(pts, s);
    double step = 0.1;
    out.converged = count == m;
    std::vector<Vec> grad(count, Vec(m)), trial(pts);
    for (std::size_t it = 0; it < max_iterations && count > m; ++it) {
        out.iterations = it + 1;
        for (std::size_t i = m; i < count; ++i) std::fill(grad[i].begin(), grad[i].end(), 0.0);
        for (std::size_t i = m; i < count; ++i) {
            for (std::size_t j = 0; j < count; ++j) {
                if (j == i) continue;
                double d2 = 0.0;
                for (std::size_t k = 0; k < m; ++k) d2 += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
                double coef = -s * std::pow(d2, -s / 2.0 - 1.0);
                for (std::size_t k = 0; k < m; ++k) grad[i][k] += coef * (pts[i][k] - pts[j][k]);
            }
        }
        double norm = 0.0;
        for (std::size_t i = m; i < count; ++i) {
            double mean = std::accumulate(grad[i].begin(), grad[i].end(), 0.0) / s;
            for (auto& g : grad[i]) {
                g -= mean;
                norm += g * g;
            }
        }
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            out.converged = std::isfinite(norm);
            break;
        }

        for (std::size_t i = m; i < count; ++i) {
            Vec z(m);
            for (std::size_t k = 0; k < m; ++k) z[k] = pts[i][k] - step * grad[i][k] / norm;
            trial[i] = project_to_simplex(z);
        }
        double e = riesz_energy(trial, s);
        if (e < energy) {
            pts.swap(trial);
            for (std::size_t i = 0; i < m; ++i) trial[i] = pts[i];
            energy = e;
            step *= 1.2;
        } else {
            step *= 0.5;
        }
        if (step < 1e-12) {
            out.converged = true;
            break;
        }
    }
    out.directions = std::move(pts);
    out.energy = energy;
    return out;
}

} // namespace edts::moo
