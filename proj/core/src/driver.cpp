#include "dclnas/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dclnas/error.hpp"
#include "dclnas/select.hpp"
#include "json_io.hpp"

namespace dclnas {

AblationFlags parse_ablation(std::string_view text) {
    AblationFlags f;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find(',', start);
        if (end == std::string_view::npos) end = text.size();
        const auto tok = text.substr(start, end - start);
        if (tok == "none" || tok.empty()) {
        } else if (tok == "no-pretrain") {
            f.no_pretrain = true;
        } else if (tok == "mse") {
            f.mse_finetune = true;
        } else if (tok == "no-crossover") {
            f.no_crossover = true;
        } else if (tok == "blank") {
            f = {true, true, true};
        } else {
            throw ConfigError("unknown ablation '" + std::string(tok) +
                              "' (expected none, no-pretrain, mse, no-crossover, blank)");
        }
        start = end + 1;
    }
    return f;
}

std::string ablation_name(const AblationFlags& f) {
    if (f.no_pretrain && f.mse_finetune && f.no_crossover) return "blank";
    std::string s;
    auto add = [&](const char* t) { s += s.empty() ? t : std::string(",") + t; };
    if (f.no_pretrain) add("no-pretrain");
    if (f.mse_finetune) add("mse");
    if (f.no_crossover) add("no-crossover");
    return s.empty() ? "none" : s;
}

void check_config(const SearchConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.space != "nasbench101" && cfg.space != "nasbench201")
        problems.push_back("space must be nasbench101 or nasbench201, got '" + cfg.space + "'");
    if (cfg.n < 2) problems.emplace_back("N must be >= 2");
    if (cfg.r < 1) problems.emplace_back("r must be >= 1");
    if (cfg.t_gap < 1) problems.emplace_back("t_gap must be >= 1");
    if (cfg.n_infill < 1) problems.emplace_back("N_infill must be >= 1");
    if (cfg.fes_max < 1) problems.emplace_back("fes_max must be >= 1");
    if (cfg.c_a < 1) problems.emplace_back("C_a must be >= 1");
    if (cfg.d_e < 1) problems.emplace_back("d_e must be >= 1");
    if (cfg.uncertainty_passes < 2) problems.emplace_back("uncertainty_passes must be >= 2");
    if (!(cfg.uncertainty_sigma >= 0.0)) problems.emplace_back("uncertainty_sigma must be >= 0");
    if (cfg.oracle.kind == OracleKind::tabular && cfg.oracle.tabular_path.empty())
        problems.emplace_back("oracle.path is required for a tabular oracle");
    auto collect = [&](auto&& check) {
        try {
            check();
        } catch (const ConfigError& e) {
            std::istringstream lines(e.what());
            std::string line;
            std::getline(lines, line);
            while (std::getline(lines, line)) problems.push_back(line.substr(line.find("- ") + 2));
        }
    };
    collect([&] {
        EvoConfig e = cfg.evo;
        e.r = cfg.r;
        check_config(e);
    });
    collect([&] { check_config(cfg.finetune); });
    collect([&] { check_config(cfg.pretrain); });
    if (!problems.empty()) {
        std::string msg = "invalid search config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

namespace {

using io::ojson;

// Typed reader that records problems instead of stopping at the first one.
class Reader {
public:
    Reader(const io::json& j, std::string prefix, std::vector<std::string>& problems)
        : j_(j), prefix_(std::move(prefix)), problems_(problems) {
        if (!j_.is_object()) problems_.push_back(where("") + "must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.emplace_back(key);
        if (!j_.is_object() || !j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const io::json::exception&) {
            problems_.push_back(where(key) + "has the wrong type");
        }
    }

    const io::json* child(const char* key) {
        seen_.emplace_back(key);
        if (!j_.is_object() || !j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    void finish() {
        if (!j_.is_object()) return;
        for (const auto& [k, v] : j_.items())
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) problems_.push_back(where(k) + "is not a known key");
    }

    std::string where(const std::string& key) const {
        const std::string path = prefix_.empty() ? key : (key.empty() ? prefix_ : prefix_ + "." + key);
        return path.empty() ? std::string("config ") : path + " ";
    }

private:
    const io::json& j_;
    std::string prefix_;
    std::vector<std::string>& problems_;
    std::vector<std::string> seen_;
};

}  // namespace

SearchConfig search_config_from_json(std::string_view text) {
    const auto j = io::parse(text, "search config");
    SearchConfig cfg;
    std::vector<std::string> problems;
    Reader top(j, "", problems);
    top.get("space", cfg.space);
    top.get("N", cfg.n);
    top.get("r", cfg.r);
    top.get("t_gap", cfg.t_gap);
    top.get("N_infill", cfg.n_infill);
    top.get("fes_max", cfg.fes_max);
    top.get("C_a", cfg.c_a);
    top.get("d_e", cfg.d_e);
    top.get("uncertainty_passes", cfg.uncertainty_passes);
    top.get("uncertainty_sigma", cfg.uncertainty_sigma);
    top.get("seed", cfg.seed);
    top.get("pretrain_inline", cfg.pretrain_inline);
    if (const auto* c = top.child("pretrain_checkpoint"); c && !c->is_null()) {
        if (c->is_string()) {
            cfg.pretrain_checkpoint = c->get<std::string>();
        } else {
            problems.emplace_back("pretrain_checkpoint must be a string or null");
        }
    }
    if (const auto* c = top.child("evo")) {
        Reader r(*c, "evo", problems);
        r.get("P_c", cfg.evo.p_c);
        r.get("P_m", cfg.evo.p_m);
        r.get("P_keep", cfg.evo.p_keep);
        r.get("round_cap", cfg.evo.round_cap);
        r.get("crossover_retries", cfg.evo.crossover_retries);
        std::string policy;
        r.get("retention_policy", policy);
        if (policy == "pkeep_only") {
            cfg.evo.retention = RetentionPolicy::pkeep_only;
        } else if (policy == "pkeep_times_freq") {
            cfg.evo.retention = RetentionPolicy::pkeep_times_freq;
        } else if (!policy.empty()) {
            problems.push_back("evo.retention_policy must be pkeep_only or pkeep_times_freq, got '" + policy + "'");
        }
        r.finish();
    }
    if (const auto* c = top.child("finetune")) {
        Reader r(*c, "finetune", problems);
        r.get("batch_size", cfg.finetune.batch_size);
        r.get("epochs", cfg.finetune.epochs);
        r.get("learning_rate", cfg.finetune.learning_rate);
        r.finish();
    }
    if (const auto* c = top.child("pretrain")) {
        Reader r(*c, "pretrain", problems);
        r.get("batch_size", cfg.pretrain.batch_size);
        r.get("epochs", cfg.pretrain.epochs);
        r.get("cluster_sizes", cfg.pretrain.cluster_sizes);
        r.get("learning_rate", cfg.pretrain.learning_rate);
        r.get("include_positive_in_denominator", cfg.pretrain.include_positive_in_denominator);
        r.get("beta", cfg.pretrain.beta);
        r.finish();
    }
    if (const auto* c = top.child("ablation")) {
        Reader r(*c, "ablation", problems);
        r.get("no_pretrain", cfg.ablation.no_pretrain);
        r.get("mse_finetune", cfg.ablation.mse_finetune);
        r.get("no_crossover", cfg.ablation.no_crossover);
        r.finish();
    }
    if (const auto* c = top.child("oracle")) {
        Reader r(*c, "oracle", problems);
        std::string kind = "synthetic";
        r.get("kind", kind);
        if (kind == "synthetic") {
            cfg.oracle.kind = OracleKind::synthetic;
        } else if (kind == "tabular") {
            cfg.oracle.kind = OracleKind::tabular;
        } else {
            problems.push_back("oracle.kind must be synthetic or tabular, got '" + kind + "'");
        }
        r.get("path", cfg.oracle.tabular_path);
        r.get("landscape_seed", cfg.oracle.landscape_seed);
        r.finish();
    }
    top.finish();
    // Value checks run on whatever parsed, so one error lists every problem.
    try {
        check_config(cfg);
    } catch (const ConfigError& e) {
        std::istringstream lines(e.what());
        std::string line;
        std::getline(lines, line);
        while (std::getline(lines, line)) problems.push_back(line.substr(line.find("- ") + 2));
    }
    if (!problems.empty()) {
        std::string msg = "invalid search config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
    return cfg;
}

std::string to_json(const SearchConfig& cfg) {
    ojson j;
    j["space"] = cfg.space;
    j["N"] = cfg.n;
    j["r"] = cfg.r;
    j["t_gap"] = cfg.t_gap;
    j["N_infill"] = cfg.n_infill;
    j["fes_max"] = cfg.fes_max;
    j["C_a"] = cfg.c_a;
    j["d_e"] = cfg.d_e;
    j["uncertainty_passes"] = cfg.uncertainty_passes;
    j["uncertainty_sigma"] = cfg.uncertainty_sigma;
    j["seed"] = cfg.seed;
    j["pretrain_inline"] = cfg.pretrain_inline;
    j["pretrain_checkpoint"] = cfg.pretrain_checkpoint ? ojson(*cfg.pretrain_checkpoint) : ojson(nullptr);
    j["evo"] = {{"P_c", cfg.evo.p_c},
                {"P_m", cfg.evo.p_m},
                {"P_keep", cfg.evo.p_keep},
                {"round_cap", cfg.evo.round_cap},
                {"crossover_retries", cfg.evo.crossover_retries},
                {"retention_policy",
                 cfg.evo.retention == RetentionPolicy::pkeep_only ? "pkeep_only" : "pkeep_times_freq"}};
    j["finetune"] = {{"batch_size", cfg.finetune.batch_size},
                     {"epochs", cfg.finetune.epochs},
                     {"learning_rate", cfg.finetune.learning_rate}};
    j["pretrain"] = {{"batch_size", cfg.pretrain.batch_size},
                     {"epochs", cfg.pretrain.epochs},
                     {"cluster_sizes", cfg.pretrain.cluster_sizes},
                     {"learning_rate", cfg.pretrain.learning_rate},
                     {"include_positive_in_denominator", cfg.pretrain.include_positive_in_denominator},
                     {"beta", cfg.pretrain.beta}};
    j["ablation"] = {{"no_pretrain", cfg.ablation.no_pretrain},
                     {"mse_finetune", cfg.ablation.mse_finetune},
                     {"no_crossover", cfg.ablation.no_crossover}};
    j["oracle"] = {{"kind", cfg.oracle.kind == OracleKind::tabular ? "tabular" : "synthetic"},
                   {"path", cfg.oracle.tabular_path},
                   {"landscape_seed", cfg.oracle.landscape_seed}};
    return j.dump(2) + "\n";
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t best_index(const std::vector<LabeledSample>& archive) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < archive.size(); ++i)
        if (archive[i].val_acc > archive[best].val_acc) best = i;
    return best;
}

void check_model_fits(const PredictorModel& m, const SearchSpace& space, const PathTable& table) {
    const auto& d = m.dims();
    if (d.num_ops != space.num_ops() || d.l_seq != space.l_seq() || d.table_rows != static_cast<int>(table.size()) + 1)
        throw ConfigError("pretrained predictor does not match space '" + space.name() + "'");
}

PredictorModel initial_model(const SearchSpace& space, const PathTable& table, const SearchConfig& cfg,
                             const PredictorModel* pretrained, std::string& origin, TrainLog& log) {
    if (!cfg.ablation.no_pretrain) {
        if (pretrained) {
            check_model_fits(*pretrained, space, table);
            origin = "given";
            return *pretrained;
        }
        if (cfg.pretrain_checkpoint) {
            auto m = PredictorModel::load(*cfg.pretrain_checkpoint);
            check_model_fits(m, space, table);
            origin = "checkpoint";
            return m;
        }
    }
    ModelDims dims = default_dims(space, table);
    dims.d_e = cfg.d_e;
    PredictorModel m(dims, derive_seed(cfg.seed, {0x30DE1}));
    origin = "fresh";
    if (!cfg.ablation.no_pretrain && cfg.pretrain_inline) {
        PretrainConfig pc = cfg.pretrain;
        pc.seed = derive_seed(cfg.seed, {0x9E7});
        pretrain(m, EncodingContext{space, table}, pc, &log);
        origin = "inline";
    }
    return m;
}

ojson offspring_entry(const Offspring& o) {
    return ojson{{"hash", arch_hash(o.arch).hex().substr(0, 16)},
                 {"parent", o.parent},
                 {"partner", o.partner},
                 {"operators", o.operators},
                 {"round", o.round}};
}

}  // namespace

SearchResult run_search(const SearchSpace& space, const PathTable& table, const FitnessOracle& oracle,
                        const SearchConfig& cfg, const PredictorModel* pretrained) {
    check_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    SearchResult res;
    const EncodingContext ctx{space, table};

    EvoConfig evo = cfg.evo;
    evo.r = cfg.r;
    if (cfg.ablation.no_crossover) evo.p_c = 0.0;
    FinetuneConfig ft = cfg.finetune;
    ft.objective = cfg.ablation.mse_finetune ? FinetuneObjective::mse : FinetuneObjective::pairwise;

    std::string origin;
    PredictorModel model = initial_model(space, table, cfg, pretrained, origin, res.train_log);
    auto log = [&](const ojson& j) { res.run_log.push_back(j.dump()); };
    log({{"event", "start"},
         {"seed", cfg.seed},
         {"ablation", ablation_name(cfg.ablation)},
         {"predictor", origin},
         {"fes_max", cfg.fes_max}});

    BudgetLedger ledger(cfg.fes_max);
    HashSet evaluated;
    auto evaluate = [&](const Architecture& a) {
        ledger.query(oracle, a);
        evaluated.insert(arch_hash(a));
    };

    {
        Rng rng = make_rng(derive_seed(cfg.seed, {0x1417}));
        HashSet drawn;
        std::vector<Architecture> init;
        for (int attempt = 0; init.size() < static_cast<std::size_t>(cfg.n); ++attempt) {
            if (attempt >= kSamplingRetryCap * cfg.n)
                throw SamplingExhausted("could not draw " + std::to_string(cfg.n) + " distinct initial architectures");
            auto a = random_architecture(space, rng);
            if (drawn.insert(arch_hash(a)).second) init.push_back(std::move(a));
        }
        for (const auto& a : init) evaluate(a);
    }
    auto tune = [&](int iteration) {
        FinetuneConfig c = ft;
        c.seed = derive_seed(cfg.seed, {0xF1, static_cast<std::uint64_t>(iteration)});
        const std::size_t before = res.train_log.records.size();
        finetune(model, ctx, ledger.archive(), c, &res.train_log);
        const double last = res.train_log.records.size() > before ? res.train_log.records.back().loss : 0.0;
        log({{"event", "finetune"}, {"iteration", iteration}, {"samples", ledger.archive().size()}, {"final_loss", last}});
    };
    tune(0);

    std::vector<std::size_t> label(static_cast<std::size_t>(cfg.n));
    std::iota(label.begin(), label.end(), std::size_t{0});
    auto record = [&](int iteration) {
        const double best = ledger.archive()[best_index(ledger.archive())].val_acc;
        res.history.push_back({iteration, ledger.fes(), best});
        log({{"event", "evaluated"}, {"iteration", iteration}, {"fes", ledger.fes()}, {"best_val", best}});
    };
    record(0);

    int iteration = 0;
    while (ledger.fes() < cfg.fes_max) {
        ++iteration;
        std::vector<Architecture> pop;
        for (auto i : label) pop.push_back(ledger.archive()[i].arch);
        std::vector<Architecture> last_offspring;
        for (int gen = 0; gen < cfg.t_gap; ++gen) {
            const auto offs = generate_offspring(
                space, pop, evo, evaluated,
                derive_seed(cfg.seed, {0xE0, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(gen)}));
            last_offspring.clear();
            ojson prov = ojson::array();
            for (const auto& o : offs) {
                last_offspring.push_back(o.arch);
                prov.push_back(offspring_entry(o));
            }
            auto sel = environment_selection(space, table, pop, last_offspring, model, cfg.n, cfg.c_a);
            ojson families = ojson::array();
            for (const auto& f : sel.families.families) families.push_back(f);
            log({{"event", "generation"},
                 {"iteration", iteration},
                 {"generation", gen},
                 {"offspring", prov},
                 {"families", families},
                 {"from_families", sel.from_families},
                 {"best_predicted", *std::max_element(sel.survivor_scores.begin(), sel.survivor_scores.end())}});
            pop = std::move(sel.survivors);
        }

        const int want = std::min(cfg.n_infill, ledger.remaining());
        const std::uint64_t infill_seed = derive_seed(cfg.seed, {0x1F, static_cast<std::uint64_t>(iteration)});
        InfillResult inf;
        bool widened = false;
        try {
            Rng rng = make_rng(infill_seed);
            inf = infill_sampling(space, table, pop, model, want, evaluated, rng, cfg.uncertainty_passes,
                                  cfg.uncertainty_sigma);
        } catch (const ShortfallError&) {
            // Too few unevaluated survivors; widen the pool with the last offspring.
            std::vector<Architecture> pool = pop;
            pool.insert(pool.end(), last_offspring.begin(), last_offspring.end());
            Rng rng = make_rng(infill_seed);
            inf = infill_sampling(space, table, pool, model, want, evaluated, rng, cfg.uncertainty_passes,
                                  cfg.uncertainty_sigma);
            widened = true;
        }
        ojson picked = ojson::array();
        for (int i : inf.selected_indices) {
            const auto& c = inf.candidates[static_cast<std::size_t>(i)];
            picked.push_back({{"hash", arch_hash(c.arch).hex().substr(0, 16)},
                              {"score", c.predicted_score},
                              {"uncertainty", c.uncertainty},
                              {"front", c.front}});
        }
        log({{"event", "infill"}, {"iteration", iteration}, {"widened_pool", widened}, {"selected", picked}});

        const std::size_t first_new = ledger.archive().size();
        for (const auto& a : inf.selected) evaluate(a);
        tune(iteration);

        std::vector<std::size_t> merged = label;
        for (std::size_t i = first_new; i < ledger.archive().size(); ++i) merged.push_back(i);
        std::stable_sort(merged.begin(), merged.end(), [&](std::size_t a, std::size_t b) {
            const double va = ledger.archive()[a].val_acc, vb = ledger.archive()[b].val_acc;
            if (va != vb) return va > vb;
            return a < b;
        });
        merged.resize(std::min(merged.size(), static_cast<std::size_t>(cfg.n)));
        label = std::move(merged);
        record(iteration);
    }

    res.archive = ledger.archive();
    res.best = res.archive[best_index(res.archive)];
    res.fes = ledger.fes();
    res.iterations = iteration;
    log({{"event", "done"}, {"fes", res.fes}, {"iterations", iteration}, {"best_val", res.best.val_acc}});
    res.wall_ms = ms_since(t0);
    return res;
}

SearchResult random_search(const SearchSpace& space, const FitnessOracle& oracle, int fes_max, std::uint64_t seed) {
    if (fes_max < 1) throw ParameterError("fes_max must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    SearchResult res;
    BudgetLedger ledger(fes_max);
    Rng rng = make_rng(derive_seed(seed, {0x4A2D}));
    for (int attempt = 0; ledger.fes() < fes_max; ++attempt) {
        if (attempt >= kSamplingRetryCap * fes_max)
            throw SamplingExhausted("could not draw " + std::to_string(fes_max) + " distinct architectures");
        const auto a = random_architecture(space, rng);
        if (ledger.archived(a)) continue;
        ledger.query(oracle, a);
        const double best = ledger.archive()[best_index(ledger.archive())].val_acc;
        res.history.push_back({ledger.fes(), ledger.fes(), best});
    }
    res.archive = ledger.archive();
    res.best = res.archive[best_index(res.archive)];
    res.fes = ledger.fes();
    res.wall_ms = ms_since(t0);
    return res;
}

namespace {

// Merge sort on y that returns the number of exchanges (discordant swaps).
std::uint64_t sort_count_swaps(std::vector<double>& y, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t swaps = sort_count_swaps(y, buf, lo, mid) + sort_count_swaps(y, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (y[j] < y[i]) {
            swaps += mid - i;
            buf[k++] = y[j++];
        } else {
            buf[k++] = y[i++];
        }
    }
    while (i < mid) buf[k++] = y[i++];
    while (j < hi) buf[k++] = y[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              y.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted range.
template <class Eq>
std::uint64_t tied_pairs(std::size_t n, Eq eq) {
    std::uint64_t total = 0, run = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (eq(i - 1, i)) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total + run * (run - 1) / 2;
}

}  // namespace

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ParameterError("kendall_tau needs equal lengths");
    const std::size_t n = x.size();
    if (n < 2) throw ParameterError("kendall_tau needs at least two items");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }
    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const std::uint64_t n1 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
    const std::uint64_t n3 =
        tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b] && ys[a] == ys[b]; });
    std::vector<double> buf(n);
    const std::uint64_t swaps = sort_count_swaps(ys, buf, 0, n);
    const std::uint64_t n2 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
    const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
    if (denom == 0.0) return 0.0;
    const double num = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                       static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
    return num / denom;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_artifacts(const std::filesystem::path& out_dir, const SearchSpace& space, const SearchConfig& cfg,
                     const SearchResult& result) {
    io::write_file(out_dir / "config.json", to_json(cfg));
    std::string log;
    for (const auto& line : result.run_log) log += line + "\n";
    io::write_file(out_dir / "run_log.jsonl", log);
    std::ostringstream archive;
    for (const auto& s : result.archive) write_tabular_record(archive, space, s);
    io::write_file(out_dir / "archive.jsonl", archive.str());

    ojson best;
    best["hash"] = arch_hash(result.best.arch).hex();
    best["ops"] = node_op_names(space, result.best.arch);
    best["adjacency"] = adjacency_bits(result.best.arch);
    best["val_acc"] = result.best.val_acc;
    best["test_acc"] = result.best.test_acc ? ojson(*result.best.test_acc) : ojson(nullptr);
    best["fes"] = result.fes;
    best["iterations"] = result.iterations;
    io::write_file(out_dir / "best.json", best.dump(2) + "\n");

    std::string hist = "iteration,fes,best_val\n";
    for (const auto& h : result.history)
        hist += std::to_string(h.iteration) + "," + std::to_string(h.fes) + "," + fmt_double(h.best_val) + "\n";
    io::write_file(out_dir / "history.csv", hist);

    std::ostringstream train;
    result.train_log.write_jsonl(train);
    io::write_file(out_dir / "timing" / "train_log.jsonl", train.str());
    io::write_file(out_dir / "timing" / "timing.json", ojson{{"wall_ms", result.wall_ms}}.dump(2) + "\n");
}

}  // namespace dclnas
