#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ref {

namespace {

void walk(const dclnas::Architecture& a, int v, std::vector<int>& ops, std::vector<std::vector<int>>& out) {
    const int n = a.num_nodes();
    if (v == n - 1) {
        out.push_back(ops);
        return;
    }
    for (int w = 0; w < n; ++w) {
        if (!a.has_edge(v, w)) continue;
        if (w != n - 1) ops.push_back(a.op(w));
        walk(a, w, ops, out);
        if (w != n - 1) ops.pop_back();
    }
}

int sign(double x) { return (x > 0) - (x < 0); }

}  // namespace

std::vector<std::vector<int>> routes(const dclnas::Architecture& arch) {
    std::vector<std::vector<int>> out;
    std::vector<int> ops;
    walk(arch, 0, ops, out);
    return out;
}

int manhattan(const std::string& a, const std::string& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

double contrastive_loss(const Eigen::MatrixXd& q, const Eigen::MatrixXd& p, const std::vector<int>& assignment,
                        const std::vector<double>& taus) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        const int j = assignment[static_cast<std::size_t>(i)];
        const double num = std::exp(q.row(i).dot(p.row(j)) / taus[static_cast<std::size_t>(j)]);
        double den = 0.0;
        for (Eigen::Index k = 0; k < p.rows(); ++k)
            if (k != j) den += std::exp(q.row(i).dot(p.row(k)) / taus[static_cast<std::size_t>(k)]);
        total += -std::log(num / den);
    }
    return total;
}

double pairwise_loss(const std::vector<double>& pred, const std::vector<double>& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (std::size_t j = 0; j < pred.size(); ++j) {
            if (i == j) continue;
            const double dy = y[i] - y[j];
            if (dy == 0.0) continue;
            const double dp = pred[i] - pred[j];
            if (sign(dp) != sign(dy)) total += std::abs(dp);
        }
    return total;
}

double crowding(const std::vector<std::string>& members, const std::string& medoid, double beta) {
    double sum = 0.0;
    for (const auto& m : members) sum += manhattan(m, medoid);
    const double gs = static_cast<double>(members.size());
    return sum / (gs * std::log(gs + beta));
}

long best_medoid_cost(const std::vector<int>& dist, int n, int k) {
    long best = std::numeric_limits<long>::max();
    std::vector<int> pick(static_cast<std::size_t>(n), 0);
    std::fill(pick.end() - k, pick.end(), 1);
    do {
        long cost = 0;
        for (int i = 0; i < n; ++i) {
            int d = std::numeric_limits<int>::max();
            for (int m = 0; m < n; ++m)
                if (pick[static_cast<std::size_t>(m)]) d = std::min(d, dist[static_cast<std::size_t>(i * n + m)]);
            cost += d;
        }
        best = std::min(best, cost);
    } while (std::next_permutation(pick.begin(), pick.end()));
    return best;
}

std::vector<std::vector<int>> pareto_fronts(const std::vector<std::array<double, 2>>& obj) {
    auto dom = [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
        return a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1]);
    };
    std::vector<int> left(obj.size());
    std::iota(left.begin(), left.end(), 0);
    std::vector<std::vector<int>> fronts;
    while (!left.empty()) {
        std::vector<int> front, rest;
        for (int i : left) {
            bool dominated = false;
            for (int j : left)
                if (j != i && dom(obj[static_cast<std::size_t>(j)], obj[static_cast<std::size_t>(i)])) dominated = true;
            (dominated ? rest : front).push_back(i);
        }
        fronts.push_back(front);
        left = rest;
    }
    return fronts;
}

std::vector<std::vector<int>> families(const std::vector<std::vector<int>>& dist, const std::vector<int>& hash_rank,
                                       int c_a) {
    const int no = static_cast<int>(hash_rank.size());
    std::vector<bool> claimed(static_cast<std::size_t>(no), false);
    std::vector<std::vector<int>> out;
    for (const auto& row : dist) {
        std::vector<int> free;
        for (int o = 0; o < no; ++o)
            if (!claimed[static_cast<std::size_t>(o)]) free.push_back(o);
        const int take = std::min<int>(c_a, static_cast<int>(free.size()));
        using Key = std::vector<std::array<int, 3>>;
        Key best_key;
        std::vector<int> best;
        std::vector<int> mask(free.size(), 0);
        std::fill(mask.end() - take, mask.end(), 1);
        bool first = true;
        do {
            Key key;
            std::vector<int> subset;
            for (std::size_t i = 0; i < free.size(); ++i)
                if (mask[i]) {
                    const int o = free[i];
                    key.push_back({row[static_cast<std::size_t>(o)], hash_rank[static_cast<std::size_t>(o)], o});
                    subset.push_back(o);
                }
            std::sort(key.begin(), key.end());
            if (first || key < best_key) {
                best_key = key;
                best.clear();
                for (const auto& k : key) best.push_back(k[2]);
                first = false;
            }
        } while (std::next_permutation(mask.begin(), mask.end()));
        for (int o : best) claimed[static_cast<std::size_t>(o)] = true;
        out.push_back(best);
    }
    return out;
}

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    long conc = 0, disc = 0, tie_x = 0, tie_y = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const int sx = sign(x[i] - x[j]), sy = sign(y[i] - y[j]);
            if (sx == 0 && sy == 0) continue;
            if (sx == 0) {
                ++tie_x;
            } else if (sy == 0) {
                ++tie_y;
            } else if (sx == sy) {
                ++conc;
            } else {
                ++disc;
            }
        }
    const double denom = std::sqrt(static_cast<double>(conc + disc + tie_y) * static_cast<double>(conc + disc + tie_x));
    return denom == 0.0 ? 0.0 : static_cast<double>(conc - disc) / denom;
}

dclnas::ad::Grads finite_difference(dclnas::PredictorModel& model,
                                    const std::function<double(const dclnas::PredictorModel&)>& loss, double h) {
    dclnas::ad::Grads g;
    for (std::size_t s = 0; s < model.num_params(); ++s) {
        auto& p = model.param(static_cast<int>(s));
        dclnas::ad::Mat d = dclnas::ad::Mat::Zero(p.rows(), p.cols());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double keep = p.data()[i];
            p.data()[i] = keep + h;
            const double up = loss(model);
            p.data()[i] = keep - h;
            const double down = loss(model);
            p.data()[i] = keep;
            d.data()[i] = (up - down) / (2.0 * h);
        }
        g.push_back(std::move(d));
    }
    return g;
}

double max_relative_error(const dclnas::ad::Grads& a, const dclnas::ad::Grads& n, double floor, std::string* worst,
                          const std::vector<std::string>* names) {
    double err = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s)
        for (Eigen::Index i = 0; i < a[s].size(); ++i) {
            const double x = a[s].data()[i], y = n[s].data()[i];
            const double e = std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor});
            if (e > err) {
                err = e;
                if (worst && names) *worst = (*names)[s] + "[" + std::to_string(i) + "]";
            }
        }
    return err;
}

dclnas::SearchSpace tiny_space(int l_seq) {
    dclnas::SpaceDefinition d;
    d.name = "tiny";
    d.op_set = {"a", "b", "c"};
    d.max_nodes = 5;
    d.max_edges = 7;
    d.path_template = {"a", "b", "c"};
    d.l_seq = l_seq;
    return dclnas::SearchSpace(d);
}

dclnas::SearchSpace toy_fixed_space(int ops) {
    dclnas::SpaceDefinition d;
    d.name = "toy";
    for (int i = 0; i < ops; ++i) d.op_set.push_back("op" + std::to_string(i));
    d.max_nodes = 5;
    d.max_edges = 6;
    d.path_template = d.op_set;
    d.l_seq = 3;
    // 0->1, 0->2, 1->3, 1->4, 2->3, 3->4
    d.fixed_adjacency = "0110000011000100000100000";
    return dclnas::SearchSpace(d);
}

}  // namespace ref
