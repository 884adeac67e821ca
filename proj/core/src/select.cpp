#include "dclnas/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dclnas/error.hpp"

namespace dclnas {

FamilyPartition build_families(const std::vector<HardEncoding>& parents, const std::vector<HardEncoding>& offspring,
                               const std::vector<ArchHash>& offspring_hashes, int c_a) {
    if (c_a < 0) throw ParameterError("C_a must be non-negative");
    if (offspring_hashes.size() != offspring.size()) throw ParameterError("one hash per offspring required");
    FamilyPartition part;
    part.families.resize(parents.size());
    std::vector<bool> claimed(offspring.size(), false);
    for (std::size_t p = 0; p < parents.size(); ++p) {
        std::vector<std::pair<int, int>> cand;  // (distance, offspring index)
        for (std::size_t o = 0; o < offspring.size(); ++o)
            if (!claimed[o]) cand.emplace_back(manhattan_distance(parents[p], offspring[o]), static_cast<int>(o));
        std::sort(cand.begin(), cand.end(), [&](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first < y.first;
            const auto& hx = offspring_hashes[static_cast<std::size_t>(x.second)];
            const auto& hy = offspring_hashes[static_cast<std::size_t>(y.second)];
            if (hx != hy) return hx < hy;
            return x.second < y.second;
        });
        const std::size_t take = std::min(cand.size(), static_cast<std::size_t>(c_a));
        for (std::size_t i = 0; i < take; ++i) {
            part.families[p].push_back(cand[i].second);
            claimed[static_cast<std::size_t>(cand[i].second)] = true;
        }
    }
    for (std::size_t o = 0; o < offspring.size(); ++o)
        if (!claimed[o]) part.overflow.push_back(static_cast<int>(o));
    return part;
}

SelectionResult environment_selection(const SearchSpace& space, const PathTable& table,
                                      const std::vector<Architecture>& parents,
                                      const std::vector<Architecture>& offspring, const PredictorModel& model, int n,
                                      int c_a) {
    if (n < 1) throw ParameterError("N must be >= 1");
    if (parents.empty()) throw ParameterError("environment selection needs parents");

    // Unique candidates, parents first; `kept_*` map back to them.
    HashSet seen;
    std::vector<Architecture> cand;
    std::vector<ArchHash> cand_hash;
    std::vector<int> parent_slot, child_slot;
    auto admit = [&](const Architecture& a, std::vector<int>& slots) {
        const auto h = arch_hash(a);
        if (!seen.insert(h).second) return;
        slots.push_back(static_cast<int>(cand.size()));
        cand.push_back(a);
        cand_hash.push_back(h);
    };
    for (const auto& a : parents) admit(a, parent_slot);
    for (const auto& a : offspring) admit(a, child_slot);
    if (cand.size() < static_cast<std::size_t>(n))
        throw ShortfallError("environment selection has " + std::to_string(cand.size()) + " unique candidates for N = " +
                                 std::to_string(n),
                             static_cast<std::size_t>(n), cand.size());

    std::vector<EncodedArch> prepared;
    std::vector<HardEncoding> enc;
    prepared.reserve(cand.size());
    enc.reserve(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) {
        try {
            prepared.push_back(prepare(cand[i], space, table));
            enc.push_back(encode_architecture(cand[i], space, table));
        } catch (const Error& e) {
            throw StateError("scoring candidate " + cand_hash[i].hex() + " failed: " + e.what());
        }
    }
    const Eigen::VectorXd scores = score_batch(model, prepared);

    std::vector<HardEncoding> penc, oenc;
    std::vector<ArchHash> ohash;
    for (int s : parent_slot) penc.push_back(enc[static_cast<std::size_t>(s)]);
    for (int s : child_slot) {
        oenc.push_back(enc[static_cast<std::size_t>(s)]);
        ohash.push_back(cand_hash[static_cast<std::size_t>(s)]);
    }

    SelectionResult res;
    res.families = build_families(penc, oenc, ohash, c_a);
    std::vector<bool> taken(cand.size(), false);
    auto better = [&](int x, int y) {
        const double sx = scores[x], sy = scores[y];
        if (sx != sy) return sx > sy;
        return x < y;
    };
    auto choose = [&](int c) {
        taken[static_cast<std::size_t>(c)] = true;
        res.survivors.push_back(cand[static_cast<std::size_t>(c)]);
        res.survivor_scores.push_back(scores[c]);
    };
    for (std::size_t p = 0; p < penc.size() && res.survivors.size() < static_cast<std::size_t>(n); ++p) {
        int best = parent_slot[p];
        for (int o : res.families.families[p]) {
            const int c = child_slot[static_cast<std::size_t>(o)];
            if (better(c, best)) best = c;
        }
        choose(best);
        ++res.from_families;
    }
    std::vector<int> rest;
    for (std::size_t c = 0; c < cand.size(); ++c)
        if (!taken[c]) rest.push_back(static_cast<int>(c));
    std::sort(rest.begin(), rest.end(), better);
    for (int c : rest) {
        if (res.survivors.size() >= static_cast<std::size_t>(n)) break;
        choose(c);
    }
    return res;
}

ScorePerturbations draw_perturbations(const PredictorModel& model, int passes, double sigma, Rng& rng) {
    if (passes < 2) throw ParameterError("uncertainty needs at least two passes");
    if (!(sigma >= 0.0)) throw ParameterError("perturbation scale must be non-negative");
    const ad::Mat& w = model.param("head.score.w");
    ScorePerturbations p;
    p.bias = model.param("head.score.b")(0, 0);
    p.weights.reserve(static_cast<std::size_t>(passes));
    for (int k = 0; k < passes; ++k) {
        Eigen::RowVectorXd v = w.row(0);
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] *= 1.0 + sigma * standard_normal(rng);
        p.weights.push_back(std::move(v));
    }
    return p;
}

Eigen::VectorXd score_uncertainty(const ScorePerturbations& p, const Eigen::MatrixXd& hidden) {
    const auto passes = static_cast<int>(p.weights.size());
    if (passes < 2) throw ParameterError("uncertainty needs at least two passes");
    Eigen::MatrixXd s(hidden.rows(), passes);
    for (int k = 0; k < passes; ++k) {
        const Eigen::VectorXd logit = (hidden * p.weights[static_cast<std::size_t>(k)].transpose()).array() + p.bias;
        s.col(k) = (1.0 / (1.0 + (-logit.array()).exp())).matrix();
    }
    Eigen::VectorXd out(hidden.rows());
    for (Eigen::Index r = 0; r < hidden.rows(); ++r) {
        const double mean = s.row(r).mean();
        const double ss = (s.row(r).array() - mean).square().sum();
        out[r] = std::sqrt(ss / (passes - 1));
    }
    return out;
}

double predict_uncertainty(const PredictorModel& model, const SearchSpace& space, const PathTable& table,
                           const Architecture& arch, int passes, Rng& rng, double sigma) {
    const auto p = draw_perturbations(model, passes, sigma, rng);
    const ForwardPass fp = forward(model, {prepare(arch, space, table)});
    return score_uncertainty(p, fp.hidden())[0];
}

namespace {

bool dominates(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1]);
}

}  // namespace

std::vector<std::vector<int>> fast_non_dominated_sort(const std::vector<std::array<double, 2>>& obj) {
    const std::size_t n = obj.size();
    std::vector<std::vector<int>> dominated(n);
    std::vector<int> count(n, 0);
    std::vector<std::vector<int>> fronts;
    std::vector<int> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(obj[p], obj[q])) {
                dominated[p].push_back(static_cast<int>(q));
            } else if (dominates(obj[q], obj[p])) {
                ++count[p];
            }
        }
        if (count[p] == 0) current.push_back(static_cast<int>(p));
    }
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<int> next;
        for (int p : current)
            for (int q : dominated[static_cast<std::size_t>(p)])
                if (--count[static_cast<std::size_t>(q)] == 0) next.push_back(q);
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> pareto_crowding(const std::vector<std::array<double, 2>>& obj, const std::vector<int>& front) {
    const std::size_t m = front.size();
    std::vector<double> d(m, 0.0);
    if (m <= 2) {
        std::fill(d.begin(), d.end(), std::numeric_limits<double>::infinity());
        return d;
    }
    for (int k = 0; k < 2; ++k) {
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return obj[static_cast<std::size_t>(front[a])][static_cast<std::size_t>(k)] <
                   obj[static_cast<std::size_t>(front[b])][static_cast<std::size_t>(k)];
        });
        const double lo = obj[static_cast<std::size_t>(front[order.front()])][static_cast<std::size_t>(k)];
        const double hi = obj[static_cast<std::size_t>(front[order.back()])][static_cast<std::size_t>(k)];
        d[order.front()] = d[order.back()] = std::numeric_limits<double>::infinity();
        if (hi <= lo) continue;
        for (std::size_t i = 1; i + 1 < m; ++i) {
            const double prev = obj[static_cast<std::size_t>(front[order[i - 1]])][static_cast<std::size_t>(k)];
            const double next = obj[static_cast<std::size_t>(front[order[i + 1]])][static_cast<std::size_t>(k)];
            d[order[i]] += (next - prev) / (hi - lo);
        }
    }
    return d;
}

InfillResult infill_sampling(const SearchSpace& space, const PathTable& table, const std::vector<Architecture>& pool,
                             const PredictorModel& model, int n_infill, const HashSet& archive, Rng& rng, int passes,
                             double sigma) {
    if (n_infill < 1) throw ParameterError("N_infill must be >= 1");
    InfillResult res;
    HashSet seen;
    for (const auto& a : pool) {
        const auto h = arch_hash(a);
        if (archive.contains(h) || !seen.insert(h).second) continue;
        res.candidates.push_back(InfillCandidate{a, 0.0, 0.0, -1});
    }
    if (res.candidates.size() < static_cast<std::size_t>(n_infill))
        throw ShortfallError("infill pool has " + std::to_string(res.candidates.size()) +
                                 " unevaluated architectures for N_infill = " + std::to_string(n_infill),
                             static_cast<std::size_t>(n_infill), res.candidates.size());

    std::vector<EncodedArch> prepared;
    prepared.reserve(res.candidates.size());
    for (const auto& c : res.candidates) prepared.push_back(prepare(c.arch, space, table));
    const ForwardPass fp = forward(model, prepared);
    const auto pert = draw_perturbations(model, passes, sigma, rng);
    const Eigen::VectorXd unc = score_uncertainty(pert, fp.hidden());

    std::vector<std::array<double, 2>> obj(res.candidates.size());
    for (std::size_t i = 0; i < res.candidates.size(); ++i) {
        res.candidates[i].predicted_score = fp.scores()(static_cast<Eigen::Index>(i), 0);
        res.candidates[i].uncertainty = unc[static_cast<Eigen::Index>(i)];
        obj[i] = {res.candidates[i].predicted_score, res.candidates[i].uncertainty};
    }
    const auto fronts = fast_non_dominated_sort(obj);
    for (std::size_t f = 0; f < fronts.size(); ++f)
        for (int i : fronts[f]) res.candidates[static_cast<std::size_t>(i)].front = static_cast<int>(f);

    const auto want = static_cast<std::size_t>(n_infill);
    for (const auto& front : fronts) {
        if (res.selected_indices.size() + front.size() <= want) {
            res.selected_indices.insert(res.selected_indices.end(), front.begin(), front.end());
        } else {
            const auto crowd = pareto_crowding(obj, front);
            std::vector<std::size_t> order(front.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return crowd[a] > crowd[b]; });
            for (std::size_t i = 0; res.selected_indices.size() < want; ++i) res.selected_indices.push_back(front[order[i]]);
        }
        if (res.selected_indices.size() == want) break;
    }
    for (int i : res.selected_indices) res.selected.push_back(res.candidates[static_cast<std::size_t>(i)].arch);
    return res;
}

}  // namespace dclnas
