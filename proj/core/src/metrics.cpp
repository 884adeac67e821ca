#include "dclnas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dclnas/driver.hpp"
#include "dclnas/error.hpp"

namespace dclnas {

void check_spec(const SweepSpec& spec) {
    std::vector<std::string> problems;
    if (spec.label_budgets.empty()) problems.emplace_back("label_budgets must not be empty");
    for (std::size_t i = 0; i < spec.label_budgets.size(); ++i) {
        if (spec.label_budgets[i] < 2) problems.emplace_back("label budgets must be >= 2");
        if (i > 0 && spec.label_budgets[i] <= spec.label_budgets[i - 1])
            problems.emplace_back("label budgets must be strictly ascending");
    }
    if (spec.validation_budget < 0) problems.emplace_back("validation_budget must be >= 0");
    if (spec.repeats < 1) problems.emplace_back("repeats must be >= 1");
    if (spec.test_size && *spec.test_size < 2) problems.emplace_back("test_size must be >= 2");
    if (!problems.empty()) {
        std::string msg = "invalid sweep spec:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw ParameterError("mean of an empty list");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

namespace {

double tau_on(const PredictorModel& model, const SearchSpace& space, const PathTable& table,
              const std::vector<LabeledSample>& labeled, const std::vector<std::size_t>& idx) {
    std::vector<EncodedArch> prepared;
    std::vector<double> truth;
    prepared.reserve(idx.size());
    for (auto i : idx) {
        prepared.push_back(prepare(labeled[i].arch, space, table));
        truth.push_back(labeled[i].val_acc);
    }
    const Eigen::VectorXd s = score_batch(model, prepared);
    return kendall_tau(std::vector<double>(s.data(), s.data() + s.size()), truth);
}

}  // namespace

std::vector<SweepRow> run_sweep(const SearchSpace& space, const PathTable& table,
                                const std::vector<LabeledSample>& labeled, const SweepSpec& spec,
                                const SweepConfig& cfg) {
    check_spec(spec);
    const std::size_t largest = static_cast<std::size_t>(spec.label_budgets.back());
    const std::size_t val = static_cast<std::size_t>(spec.validation_budget);
    const std::size_t min_test = spec.test_size ? static_cast<std::size_t>(*spec.test_size) : 2;
    if (labeled.size() < largest + val + min_test)
        throw ParameterError("sweep needs " + std::to_string(largest) + " train + " + std::to_string(val) +
                             " validation + " + std::to_string(min_test) + " test architectures, oracle has " +
                             std::to_string(labeled.size()));
    {
        HashSet seen;
        for (const auto& s : labeled)
            if (!seen.insert(arch_hash(s.arch)).second)
                throw ParameterError("sweep input contains duplicate architecture " + arch_hash(s.arch).hex());
    }

    std::vector<SweepRow> rows;
    for (std::size_t b = 0; b < spec.label_budgets.size(); ++b) {
        const int budget = spec.label_budgets[b];
        SweepRow row;
        row.budget = budget;
        std::vector<double> val_taus;
        for (int rep = 0; rep < spec.repeats; ++rep) {
            const std::uint64_t seed =
                derive_seed(cfg.seed, {0x5EE9, static_cast<std::uint64_t>(budget), static_cast<std::uint64_t>(rep)});
            row.seeds.push_back(seed);
            std::vector<std::size_t> perm(labeled.size());
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            Rng rng = make_rng(seed);
            for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
            const auto nb = static_cast<std::size_t>(budget);
            std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nb));
            std::vector<std::size_t> valid(perm.begin() + static_cast<std::ptrdiff_t>(nb),
                                           perm.begin() + static_cast<std::ptrdiff_t>(nb + val));
            const std::size_t rest = perm.size() - nb - val;
            const std::size_t nt = spec.test_size ? std::min(rest, static_cast<std::size_t>(*spec.test_size)) : rest;
            std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(nb + val),
                                          perm.begin() + static_cast<std::ptrdiff_t>(nb + val + nt));
            row.test_size = static_cast<int>(nt);

            PredictorModel model;
            if (cfg.pretrained) {
                model = *cfg.pretrained;
            } else {
                ModelDims dims = default_dims(space, table);
                dims.d_e = cfg.d_e;
                model = PredictorModel(dims, derive_seed(seed, {0x30DE1}));
            }
            std::vector<LabeledSample> train_set;
            for (auto i : train) train_set.push_back(labeled[i]);
            FinetuneConfig ft = cfg.finetune;
            ft.seed = derive_seed(seed, {0xF1});
            finetune(model, EncodingContext{space, table}, train_set, ft);
            row.taus.push_back(tau_on(model, space, table, labeled, test));
            if (valid.size() >= 2) val_taus.push_back(tau_on(model, space, table, labeled, valid));
        }
        row.mean_tau = mean(row.taus);
        row.std_tau = sample_std(row.taus);
        row.mean_val_tau = val_taus.empty() ? 0.0 : mean(val_taus);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dclnas
