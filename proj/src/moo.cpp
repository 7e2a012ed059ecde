#include "edts/moo.hpp"

#include "edts/config.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace edts::moo {

bool dominates(const Vec& a, const Vec& b)
{
    bool strict = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] > b[k]) return false;
        if (a[k] < b[k]) strict = true;
    }
    return strict;
}

std::vector<std::vector<std::size_t>> nondominated_fronts(const std::vector<Vec>& objs)
{
    const std::size_t n = objs.size();
    for (const auto& o : objs) {
        if (o.size() != objs.front().size()) throw std::invalid_argument("nondominated_sort: mixed dimensions");
        for (double v : o)
            if (std::isnan(v)) throw std::invalid_argument("nondominated_sort: unevaluated point");
    }
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> count(n, 0);
    std::vector<std::vector<std::size_t>> fronts(1);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(objs[p], objs[q])) {
                dominated[p].push_back(q);
                ++count[q];
            } else if (dominates(objs[q], objs[p])) {
                dominated[q].push_back(p);
                ++count[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p)
        if (count[p] == 0) fronts[0].push_back(p);
    while (!fronts.back().empty()) {
        std::vector<std::size_t> next;
        for (auto p : fronts.back())
            for (auto q : dominated[p])
                if (--count[q] == 0) next.push_back(q);
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

std::vector<int> nondominated_sort(const std::vector<Vec>& objs)
{
    std::vector<int> rank(objs.size(), 0);
    auto fronts = nondominated_fronts(objs);
    for (std::size_t f = 0; f < fronts.size(); ++f)
        for (auto i : fronts[f]) rank[i] = static_cast<int>(f + 1);
    return rank;
}

namespace {

// Solves A x = rhs by Gaussian elimination with partial pivoting; false when singular.
bool solve(std::vector<Vec> a, Vec rhs, Vec& x)
{
    const std::size_t n = rhs.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (!(std::abs(a[piv][c]) > 1e-12)) return false;
        std::swap(a[piv], a[c]);
        std::swap(rhs[piv], rhs[c]);
        for (std::size_t r = c + 1; r < n; ++r) {
            double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t c = n; c-- > 0;) {
        double v = rhs[c];
        for (std::size_t k = c + 1; k < n; ++k) v -= a[c][k] * x[k];
        x[c] = v / a[c][c];
    }
    return true;
}

} // namespace

Normalization compute_normalization(const std::vector<Vec>& objs)
{
    if (objs.empty()) throw std::invalid_argument("normalize_objectives: empty population");
    const std::size_t m = objs.front().size();
    Normalization n;
    n.ideal.assign(m, std::numeric_limits<double>::infinity());
    for (const auto& o : objs)
        for (std::size_t j = 0; j < m; ++j) n.ideal[j] = std::min(n.ideal[j], o[j]);

    Vec range(m, 0.0);
    std::vector<Vec> extremes;
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < objs.size(); ++i) {
            if (objs[i][j] > objs[best][j]) {
                best = i;
            } else if (objs[i][j] == objs[best][j]) {
                // tie: prefer the point that is smaller in the other objectives, in order
                for (std::size_t k = 0; k < m; ++k) {
                    if (k == j || objs[i][k] == objs[best][k]) continue;
                    if (objs[i][k] < objs[best][k]) best = i;
                    break;
                }
            }
        }
        Vec e(m);
        for (std::size_t k = 0; k < m; ++k) e[k] = objs[best][k] - n.ideal[k];
        range[j] = objs[best][j] - n.ideal[j];
        extremes.push_back(std::move(e));
    }

    Vec b;
    n.intercepts.assign(m, 0.0);
    bool ok = solve(extremes, Vec(m, 1.0), b);
    for (std::size_t j = 0; j < m; ++j) {
        double a = ok ? 1.0 / b[j] : 0.0;
        if (!ok || !std::isfinite(a) || !(a > 1e-12)) {
            a = range[j] > 0.0 ? range[j] : 1.0;
            n.fallback = true;
        }
        n.intercepts[j] = a;
    }
    return n;
}

std::vector<Vec> apply_normalization(const std::vector<Vec>& objs, const Normalization& n)
{
    std::vector<Vec> out(objs.size());
    for (std::size_t i = 0; i < objs.size(); ++i) {
        out[i].resize(objs[i].size());
        for (std::size_t j = 0; j < objs[i].size(); ++j) out[i][j] = (objs[i][j] - n.ideal[j]) / n.intercepts[j];
    }
    return out;
}

std::vector<Vec> normalize_objectives(const std::vector<Vec>& objs)
{
    return apply_normalization(objs, compute_normalization(objs));
}

double perpendicular_distance(const Vec& s, const Vec& w)
{
    double ws = 0.0, ww = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        ws += w[k] * s[k];
        ww += w[k] * w[k];
    }
    double t = ws / ww, d2 = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        double r = s[k] - t * w[k];
        d2 += r * r;
    }
    return std::sqrt(d2);
}

Association associate(const std::vector<Vec>& normalized, const std::vector<Vec>& directions)
{
    Association a;
    a.direction.resize(normalized.size());
    a.distance.resize(normalized.size());
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < directions.size(); ++j) {
            double d = perpendicular_distance(normalized[i], directions[j]);
            if (d < best) {
                best = d;
                a.direction[i] = j;
            }
        }
        a.distance[i] = best;
    }
    return a;
}

std::vector<std::size_t> niching_tournament(const std::vector<ParetoPoint>& parents, Rng& rng)
{
    const std::size_t n = parents.size();
    std::vector<std::size_t> pool;
    pool.reserve(n);
    for (int round = 0; round < 2; ++round) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
        for (std::size_t k = 0; k + 1 < n; k += 2) {
            const auto a = perm[k], b = perm[k + 1];
            const auto& pa = parents[a];
            const auto& pb = parents[b];
            std::size_t winner;
            if (pa.direction != pb.direction)
                winner = rng.coin() ? a : b;
            else if (pa.rank != pb.rank)
                winner = pa.rank < pb.rank ? a : b;
            else if (pa.distance != pb.distance)
                winner = pa.distance < pb.distance ? a : b;
            else
                winner = rng.coin() ? a : b;
            pool.push_back(winner);
        }
    }
    return pool;
}

std::vector<std::size_t> associate_and_survive(std::vector<ParetoPoint>& merged, const std::vector<Vec>& directions,
                                               std::size_t n, Rng& rng)
{
    if (merged.size() < n) throw std::invalid_argument("associate_and_survive: fewer candidates than survivors");
    std::vector<Vec> objs;
    objs.reserve(merged.size());
    for (const auto& p : merged) objs.push_back(p.objectives);
    auto fronts = nondominated_fronts(objs);
    for (std::size_t f = 0; f < fronts.size(); ++f)
        for (auto i : fronts[f]) merged[i].rank = static_cast<int>(f + 1);

    std::vector<std::size_t> st;
    std::size_t last = 0;
    for (; last < fronts.size(); ++last) {
        st.insert(st.end(), fronts[last].begin(), fronts[last].end());
        if (st.size() >= n) break;
    }
    if (n == 0) return {};

    std::vector<Vec> st_objs;
    for (auto i : st) st_objs.push_back(merged[i].objectives);
    auto assoc = associate(normalize_objectives(st_objs), directions);
    for (std::size_t k = 0; k < st.size(); ++k) {
        merged[st[k]].direction = assoc.direction[k];
        merged[st[k]].distance = assoc.distance[k];
    }
    if (st.size() == n) return st;

    const auto& fl = fronts[last];
    std::vector<std::size_t> survivors(st.begin(), st.end() - static_cast<std::ptrdiff_t>(fl.size()));
    std::vector<std::size_t> niche(directions.size(), 0);
    for (auto i : survivors) ++niche[merged[i].direction];

    std::vector<std::vector<std::size_t>> members(directions.size());
    for (auto i : fl) members[merged[i].direction].push_back(i);

    std::size_t k = n - survivors.size();
    while (k > 0) {
        std::size_t low = SIZE_MAX;
        std::vector<std::size_t> ties;
        for (std::size_t j = 0; j < directions.size(); ++j) {
            if (members[j].empty()) continue;
            if (niche[j] < low) {
                low = niche[j];
                ties.clear();
            }
            if (niche[j] == low) ties.push_back(j);
        }
        if (ties.empty()) throw std::logic_error("associate_and_survive: ran out of candidates");
        const std::size_t j = ties.size() == 1 ? ties.front() : ties[rng.uniform_index(ties.size())];
        auto& cand = members[j];
        std::size_t pick;
        if (niche[j] == 0) {
            pick = 0;
            for (std::size_t c = 1; c < cand.size(); ++c)
                if (merged[cand[c]].distance < merged[cand[pick]].distance) pick = c;
        } else {
            pick = cand.size() == 1 ? 0 : rng.uniform_index(cand.size());
        }
        survivors.push_back(cand[pick]);
        cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(pick));
        ++niche[j];
        --k;
    }
    return survivors;
}

void Bounds::validate() const
{
    if (lower.size() != upper.size() || lower.empty()) throw std::invalid_argument("bounds: lower/upper size mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw std::invalid_argument("bounds: empty interval for variable " + std::to_string(i + 1));
}

void sbx_crossover(Vec& a, Vec& b, const Bounds& bounds, const VariationParams& p, Rng& rng)
{
    if (rng.uniform01() > p.crossover_prob) return;
    const double eta = p.crossover_eta;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double lo = bounds.lower[i], hi = bounds.upper[i];
        if (lo == hi) continue;
        if (rng.uniform01() > 0.5 || std::abs(a[i] - b[i]) <= 1e-14) continue;
        const double y1 = std::min(a[i], b[i]), y2 = std::max(a[i], b[i]);
        const double u = rng.uniform01();
        auto betaq = [&](double beta) {
            double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
            return u <= 1.0 / alpha ? std::pow(u * alpha, 1.0 / (eta + 1.0))
                                    : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
        };
        double c1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lo) / (y2 - y1)) * (y2 - y1));
        double c2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (hi - y2) / (y2 - y1)) * (y2 - y1));
        c1 = std::clamp(c1, lo, hi);
        c2 = std::clamp(c2, lo, hi);
        if (rng.uniform01() <= 0.5) {
            a[i] = c2;
            b[i] = c1;
        } else {
            a[i] = c1;
            b[i] = c2;
        }
    }
}

void polynomial_mutation(Vec& x, const Bounds& bounds, const VariationParams& p, Rng& rng)
{
    const double pm = p.mutation_prob < 0.0 ? 1.0 / static_cast<double>(x.size()) : p.mutation_prob;
    const double eta = p.mutation_eta;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lo = bounds.lower[i], hi = bounds.upper[i];
        if (lo == hi) {
            x[i] = lo;
            continue;
        }
        if (rng.uniform01() >= pm) continue;
        const double d1 = (x[i] - lo) / (hi - lo), d2 = (hi - x[i]) / (hi - lo);
        const double r = rng.uniform01();
        const double pw = 1.0 / (eta + 1.0);
        double dq;
        if (r < 0.5) {
            double v = 2.0 * r + (1.0 - 2.0 * r) * std::pow(1.0 - d1, eta + 1.0);
            dq = std::pow(v, pw) - 1.0;
        } else {
            double v = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(1.0 - d2, eta + 1.0);
            dq = 1.0 - std::pow(v, pw);
        }
        x[i] = std::clamp(x[i] + dq * (hi - lo), lo, hi);
    }
}

double hypervolume_2d(const std::vector<Vec>& points, const Vec& ref)
{
    std::vector<Vec> pts;
    for (const auto& p : points)
        if (p[0] < ref[0] && p[1] < ref[1]) pts.push_back(p);
    std::sort(pts.begin(), pts.end());
    double hv = 0.0, prev = ref[1];
    for (const auto& p : pts) {
        if (p[1] < prev) {
            hv += (ref[0] - p[0]) * (prev - p[1]);
            prev = p[1];
        }
    }
    return hv;
}

void OptimizerConfig::validate() const
{
    if (population < 2 || population % 2 != 0) throw std::invalid_argument("optimizer: population must be even and >= 2");
    if (objectives < 2) throw std::invalid_argument("optimizer: need at least two objectives");
    bounds.validate();
    if (!failure_objectives.empty() && failure_objectives.size() != objectives)
        throw std::invalid_argument("optimizer: failure objectives must match the objective count");
    if (!variable_names.empty() && variable_names.size() != bounds.size())
        throw std::invalid_argument("optimizer: one name per variable");
    if (!objective_names.empty() && objective_names.size() != objectives)
        throw std::invalid_argument("optimizer: one name per objective");
}

namespace {

struct Checkpointer {
    const OptimizerConfig& cfg;
    std::vector<std::string> vars, objs;

    explicit Checkpointer(const OptimizerConfig& c) : cfg(c)
    {
        vars = c.variable_names;
        objs = c.objective_names;
        for (std::size_t i = vars.size(); i < c.bounds.size(); ++i) vars.push_back("x" + std::to_string(i + 1));
        for (std::size_t i = objs.size(); i < c.objectives; ++i) objs.push_back("f" + std::to_string(i + 1));
    }

    std::filesystem::path csv(std::size_t g) const
    {
        char name[32];
        std::snprintf(name, sizeof name, "gen_%04zu.csv", g);
        return cfg.checkpoint_dir / name;
    }

    std::filesystem::path state(std::size_t g) const
    {
        char name[32];
        std::snprintf(name, sizeof name, "state_%04zu.txt", g);
        return cfg.checkpoint_dir / name;
    }

    void write(std::size_t g, const std::vector<ParetoPoint>& pop, const Rng& rng, std::size_t evals,
               std::size_t failures) const
    {
        std::filesystem::create_directories(cfg.checkpoint_dir);
        {
            std::ofstream out(csv(g), std::ios::binary);
            out << "index";
            for (const auto& v : vars) out << ',' << v;
            for (const auto& o : objs) out << ',' << o;
            out << ",rank,direction,distance,failed\n";
            for (std::size_t i = 0; i < pop.size(); ++i) {
                const auto& p = pop[i];
                out << i;
                for (double x : p.position) out << ',' << format_double(x);
                for (double f : p.objectives) out << ',' << format_double(f);
                out << ',' << p.rank << ',' << p.direction << ',' << format_double(p.distance) << ','
                    << (p.failed ? 1 : 0) << '\n';
            }
            if (!out) throw std::runtime_error("cannot write checkpoint " + csv(g).string());
        }
        std::ofstream st(state(g), std::ios::binary);
        st << "generation = " << g << "\nevaluations = " << evals << "\nfailures = " << failures
           << "\nrng = " << rng.state() << "\n";
        if (!st) throw std::runtime_error("cannot write checkpoint " + state(g).string());
    }

    bool read(std::size_t g, std::vector<ParetoPoint>& pop, Rng& rng, std::size_t& evals, std::size_t& failures) const
    {
        if (!std::filesystem::exists(csv(g)) || !std::filesystem::exists(state(g))) return false;
        Config st = Config::load(state(g));
        if (static_cast<std::size_t>(st.get_int("generation")) != g) return false;
        evals = static_cast<std::size_t>(st.get_int("evaluations"));
        failures = static_cast<std::size_t>(st.get_int("failures"));
        rng.restore(st.get_string("rng"));

        std::ifstream in(csv(g), std::ios::binary);
        std::string line;
        std::getline(in, line);
        pop.clear();
        const std::size_t nv = cfg.bounds.size(), no = cfg.objectives;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto cells = parse_number_list("checkpoint", line);
            if (cells.size() != 1 + nv + no + 4) throw std::runtime_error("malformed checkpoint " + csv(g).string());
            ParetoPoint p;
            p.position.assign(cells.begin() + 1, cells.begin() + 1 + static_cast<std::ptrdiff_t>(nv));
            p.objectives.assign(cells.begin() + 1 + static_cast<std::ptrdiff_t>(nv),
                                cells.begin() + 1 + static_cast<std::ptrdiff_t>(nv + no));
            p.rank = static_cast<int>(cells[1 + nv + no]);
            p.direction = static_cast<std::size_t>(cells[2 + nv + no]);
            p.distance = cells[3 + nv + no];
            p.failed = cells[4 + nv + no] != 0.0;
            pop.push_back(std::move(p));
        }
        if (pop.size() != cfg.population) throw std::runtime_error("checkpoint population size mismatch");
        return true;
    }
};

void evaluate_all(std::vector<ParetoPoint>& pts, std::size_t generation, const OptimizerConfig& cfg,
                  const Evaluator& evaluate, const Vec& failure)
{
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < pts.size();) {
            auto& p = pts[i];
            try {
                p.objectives = evaluate(p.position, derive_seed(cfg.seed, generation, i));
                p.failed = p.objectives.size() != cfg.objectives ||
                           std::any_of(p.objectives.begin(), p.objectives.end(), [](double v) { return !std::isfinite(v); });
            } catch (const std::exception&) {
                p.failed = true;
            }
            if (p.failed) p.objectives = failure;
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, pts.size()));
    if (jobs == 1) {
        worker();
        return;
    }
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

} // namespace

OptimizeResult optimize(const OptimizerConfig& cfg, const Evaluator& evaluate, const GenerationCallback& on_generation)
{
    cfg.validate();
    const Vec failure = cfg.failure_objectives.empty() ? Vec(cfg.objectives, 1e30) : cfg.failure_objectives;
    const std::size_t n = cfg.population;
    const std::size_t nv = cfg.bounds.size();

    auto dirs = s_energy_directions(cfg.objectives, cfg.directions ? cfg.directions : n, derive_seed(cfg.seed, 0xd1ULL));
    OptimizeResult result;
    result.directions_converged = dirs.converged;

    Rng rng(derive_seed(cfg.seed, 0x6f7074ULL));
    Checkpointer ckpt(cfg);
    const bool checkpoints = !cfg.checkpoint_dir.empty();

    std::vector<ParetoPoint> pop;
    std::size_t start = 0;
    bool loaded = false;
    if (checkpoints && cfg.resume) {
        for (std::size_t g = cfg.generations + 1; g-- > 0;) {
            if (ckpt.read(g, pop, rng, result.evaluations, result.failures)) {
                start = g;
                loaded = true;
                result.resumed_from = g;
                break;
            }
        }
    }

    if (!loaded) {
        pop.resize(n);
        for (auto& p : pop) {
            p.position.resize(nv);
            for (std::size_t k = 0; k < nv; ++k) p.position[k] = rng.uniform(cfg.bounds.lower[k], cfg.bounds.upper[k]);
        }
        evaluate_all(pop, 0, cfg, evaluate, failure);
        result.evaluations += n;
        for (const auto& p : pop) result.failures += p.failed;
        auto keep = associate_and_survive(pop, dirs.directions, n, rng);
        std::vector<ParetoPoint> next;
        for (auto i : keep) next.push_back(pop[i]);
        pop = std::move(next);
        if (checkpoints) ckpt.write(0, pop, rng, result.evaluations, result.failures);
        if (on_generation) on_generation({0, pop});
    }

    for (std::size_t g = start + 1; g <= cfg.generations; ++g) {
        auto pool = niching_tournament(pop, rng);
        std::vector<ParetoPoint> offspring(n);
        for (std::size_t k = 0; k + 1 < n; k += 2) {
            Vec a = pop[pool[k]].position, b = pop[pool[k + 1]].position;
            sbx_crossover(a, b, cfg.bounds, cfg.variation, rng);
            polynomial_mutation(a, cfg.bounds, cfg.variation, rng);
            polynomial_mutation(b, cfg.bounds, cfg.variation, rng);
            offspring[k].position = std::move(a);
            offspring[k + 1].position = std::move(b);
        }
        evaluate_all(offspring, g, cfg, evaluate, failure);
        result.evaluations += n;
        for (const auto& p : offspring) result.failures += p.failed;

        std::vector<ParetoPoint> merged = pop;
        merged.insert(merged.end(), offspring.begin(), offspring.end());
        auto keep = associate_and_survive(merged, dirs.directions, n, rng);
        std::vector<ParetoPoint> next;
        next.reserve(n);
        for (auto i : keep) next.push_back(merged[i]);
        pop = std::move(next);
        if (checkpoints) ckpt.write(g, pop, rng, result.evaluations, result.failures);
        if (on_generation) on_generation({g, pop});
    }

    for (const auto& p : pop)
        if (p.rank == 1) result.front.push_back(p);
    result.population = std::move(pop);
    return result;
}

} // namespace edts::moo
