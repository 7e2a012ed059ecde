#pragma once

#include "edts/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace edts::moo {

using Vec = std::vector<double>;

struct ReferenceDirections {
    std::vector<Vec> directions;
    bool converged = true;  // false when the iteration cap was hit
    double energy = 0.0;
    std::size_t iterations = 0;
};

/// Riesz energy sum 1/|zi - zj|^s over all pairs.
double riesz_energy(const std::vector<Vec>& points, double s);

/// Well-spaced points on the unit simplex: the M unit vectors plus count - M points moved by
/// projected gradient descent on the Riesz s-energy with s = M.
ReferenceDirections s_energy_directions(std::size_t objectives, std::size_t count, std::uint64_t seed = 1,
                                        std::size_t max_iterations = 20000);

/// Euclidean projection onto {x >= 0, sum x = 1}.
Vec project_to_simplex(const Vec& v);

/// a <= b in every objective and < in at least one.
bool dominates(const Vec& a, const Vec& b);

/// Nondomination rank (1-based) of each point. Throws std::invalid_argument on
/// mismatched dimensions or NaN objectives.
std::vector<int> nondominated_sort(const std::vector<Vec>& objectives);
/// Indices grouped by front, F_1 first.
std::vector<std::vector<std::size_t>> nondominated_fronts(const std::vector<Vec>& objectives);

struct Normalization {
    Vec ideal;
    Vec intercepts;
    bool fallback = false;  // intercepts came from the per-axis range rule
};

Normalization compute_normalization(const std::vector<Vec>& objectives);
std::vector<Vec> normalize_objectives(const std::vector<Vec>& objectives);
std::vector<Vec> apply_normalization(const std::vector<Vec>& objectives, const Normalization& n);

/// |s - (w.s / |w|^2) w|
double perpendicular_distance(const Vec& s, const Vec& w);

struct Association {
    std::vector<std::size_t> direction;
    std::vector<double> distance;
};

/// Nearest direction by perpendicular distance; ties go to the lower index.
Association associate(const std::vector<Vec>& normalized, const std::vector<Vec>& directions);

struct ParetoPoint {
    Vec position;
    Vec objectives;
    int rank = 0;
    std::size_t direction = 0;
    double distance = 0.0;
    bool failed = false;
};

/// Two traversals over independent shuffles; each pair yields one winner. Returns indices.
std::vector<std::size_t> niching_tournament(const std::vector<ParetoPoint>& parents, Rng& rng);

/// Selects `n` survivors from `merged`, assigning rank, direction and distance to every
/// member of the surviving set. Returns survivor indices (ascending within the full fronts,
/// then in acceptance order).
std::vector<std::size_t> associate_and_survive(std::vector<ParetoPoint>& merged, const std::vector<Vec>& directions,
                                               std::size_t n, Rng& rng);

struct Bounds {
    Vec lower;
    Vec upper;
    void validate() const;
    std::size_t size() const { return lower.size(); }
};

struct VariationParams {
    double crossover_eta = 30.0;
    double crossover_prob = 0.9;
    double mutation_eta = 20.0;
    double mutation_prob = -1.0;  // negative: 1 / dimension
};

/// Bounded simulated binary crossover on a pair, in place.
void sbx_crossover(Vec& a, Vec& b, const Bounds& bounds, const VariationParams& p, Rng& rng);
/// Bounded polynomial mutation, in place.
void polynomial_mutation(Vec& x, const Bounds& bounds, const VariationParams& p, Rng& rng);

/// Area dominated by the points and bounded by `ref` (minimization, two objectives).
double hypervolume_2d(const std::vector<Vec>& points, const Vec& ref);

/// Objective function. May throw; a throwing point gets the failure objectives.
using Evaluator = std::function<Vec(const Vec& position, std::uint64_t seed)>;

struct OptimizerConfig {
    std::size_t population = 100;
    std::size_t generations = 100;
    std::size_t objectives = 2;
    std::size_t directions = 0;  // 0: same as population
    Bounds bounds;
    VariationParams variation;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    Vec failure_objectives;  // empty: 1e30 in every objective
    std::vector<std::string> variable_names;  // checkpoint column names; default x1..xn
    std::vector<std::string> objective_names; // default f1..fm
    std::filesystem::path checkpoint_dir;     // empty: no checkpoints
    bool resume = false;

    void validate() const;
};

struct GenerationLog {
    std::size_t generation = 0;
    std::vector<ParetoPoint> population;
};

struct OptimizeResult {
    std::vector<ParetoPoint> front;       // rank 1 of the final population
    std::vector<ParetoPoint> population;
    std::size_t evaluations = 0;
    std::size_t failures = 0;
    bool directions_converged = true;
    std::size_t resumed_from = 0;         // generation loaded from a checkpoint, 0 when fresh
};

using GenerationCallback = std::function<void(const GenerationLog&)>;

OptimizeResult optimize(const OptimizerConfig& config, const Evaluator& evaluate,
                        const GenerationCallback& on_generation = {});

} // namespace edts::moo
