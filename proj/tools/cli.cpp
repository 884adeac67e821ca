#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dclnas/driver.hpp"
#include "dclnas/error.hpp"
#include "dclnas/metrics.hpp"
#include "dclnas/report.hpp"

namespace dclnas {

namespace {

// Missing or unreadable files given on the command line are usage errors.
class UsageError : public Error {
public:
    using Error::Error;
};

std::string slurp(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError(std::string("cannot read ") + what + " '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> budget;
    std::string ablation;
};

SearchConfig resolve(const Globals& g) {
    SearchConfig cfg = g.config.empty() ? SearchConfig{} : search_config_from_json(slurp(g.config, "config file"));
    if (g.seed) cfg.seed = *g.seed;
    if (g.budget) cfg.fes_max = *g.budget;
    if (!g.ablation.empty()) cfg.ablation = parse_ablation(g.ablation);
    check_config(cfg);
    return cfg;
}

std::unique_ptr<FitnessOracle> make_oracle(const SearchSpace& space, const OracleConfig& oc) {
    if (oc.kind == OracleKind::tabular) {
        if (!std::filesystem::exists(oc.tabular_path))
            throw UsageError("tabular oracle file '" + oc.tabular_path + "' does not exist");
        return std::make_unique<TabularOracle>(TabularOracle::load(oc.tabular_path, space));
    }
    return std::make_unique<SyntheticLandscape>(space, oc.landscape_seed);
}

std::string fmt(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Path-encoded, contrastively pretrained predictor driving a surrogate-assisted evolutionary NAS"};
    app.set_version_flag("--version", std::string(DCLNAS_VERSION_STRING));
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "Search config JSON");
    app.add_option("--seed", g.seed, "Seed override");
    app.add_option("--out", g.out, "Output file or directory");
    app.add_option("--budget", g.budget, "fes_max override")->check(CLI::PositiveNumber);
    app.add_option("--ablation", g.ablation, "none | no-pretrain | mse | no-crossover | blank (comma separated)");

    auto* pre = app.add_subcommand("pretrain", "Contrastive pretraining of the soft encoder; writes a checkpoint");
    std::optional<int> pre_epochs, pre_batch;
    pre->add_option("--epochs", pre_epochs)->check(CLI::PositiveNumber);
    pre->add_option("--batch-size", pre_batch)->check(CLI::PositiveNumber);

    auto* search = app.add_subcommand("search", "Run the full search and write run artifacts");
    std::string search_ckpt;
    search->add_option("--checkpoint", search_ckpt, "Pretrained predictor checkpoint");

    auto* evalp = app.add_subcommand("eval-predictor", "Label-budget sweep of predictor Kendall-tau");
    std::vector<int> labels{78, 156, 469};
    int repeats = 10, validation = 200, pool_size = 5000;
    std::optional<int> test_size;
    std::string eval_ckpt;
    evalp->add_option("--labels", labels, "Training label budgets")->expected(1, -1);
    evalp->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
    evalp->add_option("--validation", validation)->check(CLI::NonNegativeNumber);
    evalp->add_option("--test-size", test_size, "Test set size (default: all remaining)");
    evalp->add_option("--pool-size", pool_size, "Sampled pool for free-topology spaces")->check(CLI::PositiveNumber);
    evalp->add_option("--checkpoint", eval_ckpt, "Pretrained predictor checkpoint");

    auto* gen = app.add_subcommand("gen-synthetic", "Write a tabular file from the synthetic landscape");
    int gen_count = 0;
    gen->add_option("--count", gen_count, "Architectures to sample (0: whole space, fixed topology only)")
        ->check(CLI::NonNegativeNumber);

    auto* exp = app.add_subcommand("export", "Dump a run's archive as a tabular file, best first");
    std::string run_dir;
    int top = 0;
    exp->add_option("--run", run_dir, "Run artifact directory")->required();
    exp->add_option("--top", top, "Keep only the best K (0: all)")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        SearchConfig cfg = resolve(g);
        const SearchSpace space = preset_space(cfg.space);
        const PathTable table = PathTable::build(space);

        if (*pre) {
            PretrainConfig pc = cfg.pretrain;
            if (pre_epochs) pc.epochs = *pre_epochs;
            if (pre_batch) pc.batch_size = *pre_batch;
            pc.seed = cfg.seed;
            check_config(pc);
            ModelDims dims = default_dims(space, table);
            dims.d_e = cfg.d_e;
            PredictorModel model(dims, derive_seed(cfg.seed, {0x30DE1}));
            TrainLog log;
            pretrain(model, EncodingContext{space, table}, pc, &log);
            const std::string path = g.out.empty() ? "pretrained.json" : g.out;
            model.save(path);
            const auto losses = log.losses("pretrain");
            out << "pretrained " << pc.epochs << " epochs, loss " << fmt(losses.front()) << " -> "
                << fmt(losses.back()) << ", checkpoint " << path << "\n";
        } else if (*search) {
            if (!search_ckpt.empty()) cfg.pretrain_checkpoint = search_ckpt;
            if (cfg.pretrain_checkpoint && !cfg.ablation.no_pretrain &&
                !std::filesystem::exists(*cfg.pretrain_checkpoint))
                throw UsageError("checkpoint '" + *cfg.pretrain_checkpoint + "' does not exist");
            const auto oracle = make_oracle(space, cfg.oracle);
            const auto res = run_search(space, table, *oracle, cfg);
            const std::string dir = g.out.empty() ? "run" : g.out;
            write_artifacts(dir, space, cfg, res);
            out << "best val_acc " << fmt(res.best.val_acc, 6) << " after " << res.fes << " evaluations ("
                << res.iterations << " infill rounds), artifacts in " << dir << "\n";
        } else if (*evalp) {
            const auto oracle = make_oracle(space, cfg.oracle);
            std::vector<LabeledSample> pool;
            if (const auto* tab = dynamic_cast<const TabularOracle*>(oracle.get())) {
                pool = tab->entries();
            } else if (space.fixed_topology()) {
                for (const auto& a : enumerate_space(space)) pool.push_back(oracle->evaluate(a));
            } else {
                Rng rng = make_rng(derive_seed(cfg.seed, {0x9001}));
                HashSet seen;
                while (pool.size() < static_cast<std::size_t>(pool_size)) {
                    auto a = random_architecture(space, rng);
                    if (seen.insert(arch_hash(a)).second) pool.push_back(oracle->evaluate(a));
                }
            }
            SweepSpec spec;
            spec.label_budgets = labels;
            spec.validation_budget = validation;
            spec.repeats = repeats;
            spec.test_size = test_size;
            SweepConfig sc;
            sc.finetune = cfg.finetune;
            sc.finetune.objective = cfg.ablation.mse_finetune ? FinetuneObjective::mse : FinetuneObjective::pairwise;
            sc.d_e = cfg.d_e;
            sc.seed = cfg.seed;
            PredictorModel pretrained;
            if (eval_ckpt.empty() && cfg.pretrain_checkpoint) eval_ckpt = *cfg.pretrain_checkpoint;
            if (!eval_ckpt.empty() && !cfg.ablation.no_pretrain) {
                if (!std::filesystem::exists(eval_ckpt)) throw UsageError("checkpoint '" + eval_ckpt + "' does not exist");
                pretrained = PredictorModel::load(eval_ckpt);
                sc.pretrained = &pretrained;
            }
            ReportBundle bundle;
            bundle.spec = spec;
            bundle.rows = run_sweep(space, table, pool, spec, sc);
            for (const auto& r : bundle.rows) bundle.seeds.insert(bundle.seeds.end(), r.seeds.begin(), r.seeds.end());
            emit_report(bundle, g.out.empty() ? "report" : g.out);
            out << "budget,test_size,mean_tau,std_tau\n";
            for (const auto& r : bundle.rows)
                out << r.budget << "," << r.test_size << "," << fmt(r.mean_tau) << "," << fmt(r.std_tau) << "\n";
        } else if (*gen) {
            SyntheticLandscape land(space, cfg.oracle.landscape_seed);
            std::vector<Architecture> archs;
            if (gen_count == 0) {
                if (!space.fixed_topology()) throw UsageError("--count is required for space '" + space.name() + "'");
                archs = enumerate_space(space);
            } else {
                Rng rng = make_rng(derive_seed(cfg.seed, {0x6E4}));
                HashSet seen;
                for (int attempt = 0; archs.size() < static_cast<std::size_t>(gen_count); ++attempt) {
                    if (attempt >= kSamplingRetryCap * gen_count)
                        throw SamplingExhausted("space has fewer than " + std::to_string(gen_count) +
                                                " distinct architectures");
                    auto a = random_architecture(space, rng);
                    if (seen.insert(arch_hash(a)).second) archs.push_back(std::move(a));
                }
            }
            const std::string path = g.out.empty() ? "synthetic.jsonl" : g.out;
            std::ofstream f(path);
            if (!f) throw IoError("cannot write '" + path + "'");
            for (const auto& a : archs) write_tabular_record(f, space, land.evaluate(a));
            out << "wrote " << archs.size() << " records to " << path << "\n";
        } else if (*exp) {
            const auto run_cfg = search_config_from_json(slurp(run_dir + "/config.json", "run config"));
            const SearchSpace run_space = preset_space(run_cfg.space);
            if (!std::filesystem::exists(run_dir + "/archive.jsonl"))
                throw UsageError("no archive.jsonl in '" + run_dir + "'");
            const auto archive = TabularOracle::load(run_dir + "/archive.jsonl", run_space);
            std::vector<LabeledSample> rows = archive.entries();
            std::stable_sort(rows.begin(), rows.end(),
                             [](const LabeledSample& a, const LabeledSample& b) { return a.val_acc > b.val_acc; });
            if (top > 0 && rows.size() > static_cast<std::size_t>(top)) rows.resize(static_cast<std::size_t>(top));
            const std::string path = g.out.empty() ? "export.jsonl" : g.out;
            std::ofstream f(path);
            if (!f) throw IoError("cannot write '" + path + "'");
            for (const auto& s : rows) write_tabular_record(f, run_space, s);
            out << "exported " << rows.size() << " records to " << path << "\n";
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace dclnas
