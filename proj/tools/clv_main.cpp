// clv: customer-lifetime-value modelling pipeline.
//
// Subcommands follow the training flow end to end:
//   generate   seeded synthetic customer panel -> CSV + schema
//   train      segmentation + transition/value models + baseline -> bundle
//   simulate   bundle + panel -> per-customer multi-year CV/CLV CSV
//   evaluate   bundle + panel -> metrics JSON, lift CSV, decile CSV
//   propensity bundle + panel -> ranked product-uptake propensities
//
// Exit codes: 0 ok, 2 usage/config, 3 data, 4 bundle version.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clv/pipeline.hpp"
#include "clv/rng.hpp"
#include "clv/text.hpp"

namespace fs = std::filesystem;

namespace {

// Missing inputs are usage errors that name the missing artifact.
void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw clv::ConfigError(std::string("missing ") + what + ": " + path);
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw clv::DataError("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw clv::ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw clv::DataError("cannot open for writing: " + path);
    out << text;
}

clv::FeatureSchema load_schema(const std::string& path) {
    return clv::FeatureSchema::from_json(load_json(path));
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    uint64_t seed = 0;
    bool seed_set = false;
    int segments = 0;
    int horizon = 0;
    double discount = 0.0;
    bool discount_set = false;
    int threads = 0;
};

// CLI flags and environment overrides win over the config file.
clv::RunConfig resolve_config(const CommonArgs& args) {
    clv::RunConfig config;
    if (!args.config_path.empty())
        config = clv::RunConfig::from_json(load_json(args.config_path));
    if (args.seed_set) config.seed = args.seed;
    if (args.segments > 0) config.segments = args.segments;
    if (args.horizon > 0) config.horizon = args.horizon;
    if (args.discount_set) config.discount = args.discount;
    if (args.threads > 0) config.threads = args.threads;
    return config;
}

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Run-config JSON")->envname("CLV_CONFIG");
    cmd->add_option("--out", args.out_dir, "Output directory")->envname("CLV_OUT");
    cmd->add_option("--seed", args.seed, "Seed override")
        ->envname("CLV_SEED")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--segments", args.segments, "Number of segments S")
        ->envname("CLV_SEGMENTS");
    cmd->add_option("--horizon", args.horizon, "Simulation horizon T")->envname("CLV_HORIZON");
    cmd->add_option("--discount", args.discount, "Discount rate d")
        ->envname("CLV_DISCOUNT")
        ->each([&args](const std::string&) { args.discount_set = true; });
    cmd->add_option("--threads", args.threads, "Worker threads")->envname("CLV_THREADS");
}

clv::PanelDataset load_panel(const std::string& panel_path, const std::string& schema_path) {
    require_file(panel_path, "panel CSV");
    require_file(schema_path, "schema JSON");
    const auto schema = load_schema(schema_path);
    return clv::PanelDataset::read_csv(panel_path, schema);
}

clv::ModelBundle load_bundle_checked(const std::string& path) {
    require_file(path, "model bundle");
    return clv::load_bundle(path);
}

int run_generate(const CommonArgs& args, const std::string& generator_config_path) {
    clv::RunConfig run_config = resolve_config(args);
    clv::GeneratorConfig gen = run_config.generator;
    if (!generator_config_path.empty())
        gen = clv::GeneratorConfig::from_json(load_json(generator_config_path));
    if (args.seed_set) gen.seed = args.seed;

    fs::create_directories(args.out_dir);
    const auto panel = clv::generate_population(gen);
    panel.validate();
    panel.write_csv((fs::path(args.out_dir) / "panel.csv").string());
    write_text((fs::path(args.out_dir) / "schema.json").string(),
               panel.schema.to_json().dump(2) + "\n");
    write_text((fs::path(args.out_dir) / "generator_config.json").string(),
               gen.to_json().dump(2) + "\n");
    clv::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), "generate",
                        clv::hex64(clv::fnv1a64(gen.to_json().dump())), gen.seed,
                        {"generator_config.json", "panel.csv", "schema.json"});
    std::cout << "generated " << panel.records.size() << " rows for "
              << panel.customer_ids().size() << " customers\n";
    return 0;
}

int run_train(const CommonArgs& args, const std::string& panel_path,
              const std::string& schema_path, const std::string& forced_path) {
    clv::RunConfig config = resolve_config(args);
    if (!forced_path.empty())
        config.forced = clv::ForcedSplitSpec::from_json(load_json(forced_path));

    const auto panel = load_panel(panel_path, schema_path);
    const auto bundle = clv::train_bundle(panel, config);

    fs::create_directories(args.out_dir);
    clv::save_bundle(bundle, (fs::path(args.out_dir) / "bundle.json").string());

    const auto assignments = clv::assign_segments(bundle.segmentation, panel);
    std::ostringstream assignments_csv;
    assignments_csv << "customer_id,year_index,segment\n";
    for (size_t i = 0; i < panel.records.size(); ++i)
        assignments_csv << panel.records[i].customer_id << ','
                        << panel.records[i].year_index << ','
                        << assignments.segment_by_record[i] << "\n";
    write_text((fs::path(args.out_dir) / "assignments.csv").string(), assignments_csv.str());

    clv::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), "train",
                        config.hash(), config.seed, {"assignments.csv", "bundle.json"});
    std::cout << "trained bundle with " << bundle.n_segments() << " segments ("
              << bundle.segmentation.used_segments() << " leaf segments)\n";
    return 0;
}

int run_simulate(const CommonArgs& args, const std::string& bundle_path,
                 const std::string& panel_path, const std::string& schema_path, int from_year,
                 bool baseline, bool distributions) {
    clv::RunConfig config = resolve_config(args);
    const auto bundle = load_bundle_checked(bundle_path);
    const auto panel = load_panel(panel_path, schema_path);
    const int start_year = from_year >= 0 ? from_year : panel.year_max();

    fs::create_directories(args.out_dir);
    std::vector<std::string> artifacts;
    const auto learned = clv::simulate_panel(bundle, panel, start_year, config.horizon,
                                             config.discount, /*use_baseline=*/false,
                                             config.churn_absorbing, config.threads);
    clv::write_simulation_csv((fs::path(args.out_dir) / "simulation.csv").string(), learned);
    artifacts.push_back("simulation.csv");
    if (distributions) {
        clv::write_distributions_json(
            (fs::path(args.out_dir) / "distributions.json").string(), learned);
        artifacts.push_back("distributions.json");
    }
    if (baseline) {
        const auto base = clv::simulate_panel(bundle, panel, start_year, config.horizon,
                                              config.discount, /*use_baseline=*/true,
                                              config.churn_absorbing, config.threads);
        clv::write_simulation_csv(
            (fs::path(args.out_dir) / "simulation_baseline.csv").string(), base);
        artifacts.push_back("simulation_baseline.csv");
    }
    std::sort(artifacts.begin(), artifacts.end());
    clv::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), "simulate",
                        config.hash(), config.seed, artifacts);
    std::cout << "simulated " << learned.size() << " customers over " << config.horizon
              << " years\n";
    return 0;
}

int run_evaluate(const CommonArgs& args, const std::string& bundle_path,
                 const std::string& panel_path, const std::string& schema_path,
                 int from_year) {
    clv::RunConfig config = resolve_config(args);
    const auto bundle = load_bundle_checked(bundle_path);
    const auto panel = load_panel(panel_path, schema_path);
    const int start_year = from_year >= 0 ? from_year : bundle.base_year;

    const auto output = clv::evaluate_panel(bundle, panel, start_year, config.horizon,
                                            {10.0, 20.0, 40.0}, config);

    fs::create_directories(args.out_dir);
    std::vector<std::string> artifacts = {"metrics.json"};
    clv::write_metrics_json((fs::path(args.out_dir) / "metrics.json").string(), output);
    if (!output.lift.empty()) {
        clv::write_lift_csv((fs::path(args.out_dir) / "lift.csv").string(), output.lift);
        artifacts.push_back("lift.csv");
    }
    if (output.decile) {
        clv::write_decile_csv((fs::path(args.out_dir) / "decile.csv").string(),
                              *output.decile);
        artifacts.push_back("decile.csv");
    }
    std::sort(artifacts.begin(), artifacts.end());
    clv::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), "evaluate",
                        config.hash(), config.seed, artifacts);
    for (const auto& report : output.learned)
        std::cout << report.period_label << ": medae=" << report.medae
                  << " acc50=" << report.accuracy_50 << " acc4=" << report.accuracy_4 << "\n";
    return 0;
}

int run_propensity(const CommonArgs& args, const std::string& bundle_path,
                   const std::string& panel_path, const std::string& schema_path,
                   int from_year, const std::string& targets_csv) {
    clv::RunConfig config = resolve_config(args);
    const auto bundle = load_bundle_checked(bundle_path);
    const auto panel = load_panel(panel_path, schema_path);
    const int start_year = from_year >= 0 ? from_year : panel.year_max();
    const auto targets = clv::split_line(targets_csv);

    const auto rows = clv::propensity_table(bundle, panel, start_year, targets);
    fs::create_directories(args.out_dir);
    clv::write_propensity_csv((fs::path(args.out_dir) / "propensity.csv").string(), rows);
    clv::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), "propensity",
                        config.hash(), config.seed, {"propensity.csv"});
    std::cout << "ranked " << rows.size() << " customers\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"customer-lifetime-value modelling pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string generator_config_path, panel_path, schema_path, bundle_path, forced_path;
    std::string targets_csv = "S01,S11";
    int from_year = -1;
    bool baseline = false, distributions = false;

    auto* generate = app.add_subcommand("generate", "Write a synthetic customer panel");
    add_common_flags(generate, args);
    generate->add_option("--generator-config", generator_config_path,
                         "Generator-config JSON (overrides run config)");

    auto* train = app.add_subcommand("train", "Fit segmentation, models and baseline");
    add_common_flags(train, args);
    train->add_option("--panel", panel_path, "Panel CSV")->required();
    train->add_option("--schema", schema_path, "Schema JSON")->required();
    train->add_option("--forced-splits", forced_path, "Forced-split spec JSON");

    auto* simulate = app.add_subcommand("simulate", "Multi-year CV/CLV per customer");
    add_common_flags(simulate, args);
    simulate->add_option("--bundle", bundle_path, "Trained bundle JSON")->required();
    simulate->add_option("--panel", panel_path, "Panel CSV")->required();
    simulate->add_option("--schema", schema_path, "Schema JSON")->required();
    simulate->add_option("--from-year", from_year, "Starting year (default: last panel year)");
    simulate->add_flag("--baseline", baseline, "Also simulate the frequency baseline");
    simulate->add_flag("--distributions", distributions,
                       "Write per-year segment distributions JSON");

    auto* evaluate = app.add_subcommand("evaluate", "Compare predictions against truth");
    add_common_flags(evaluate, args);
    evaluate->add_option("--bundle", bundle_path, "Trained bundle JSON")->required();
    evaluate->add_option("--panel", panel_path, "Panel CSV")->required();
    evaluate->add_option("--schema", schema_path, "Schema JSON")->required();
    evaluate->add_option("--from-year", from_year,
                         "Prediction year (default: bundle base year)");

    auto* propensity = app.add_subcommand("propensity", "Rank customers by uptake propensity");
    add_common_flags(propensity, args);
    propensity->add_option("--bundle", bundle_path, "Trained bundle JSON")->required();
    propensity->add_option("--panel", panel_path, "Panel CSV")->required();
    propensity->add_option("--schema", schema_path, "Schema JSON")->required();
    propensity->add_option("--from-year", from_year,
                           "Ranking year (default: last panel year)");
    propensity->add_option("--targets", targets_csv,
                           "Comma-separated target subtree labels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (generate->parsed()) return run_generate(args, generator_config_path);
        if (train->parsed()) return run_train(args, panel_path, schema_path, forced_path);
        if (simulate->parsed())
            return run_simulate(args, bundle_path, panel_path, schema_path, from_year,
                                baseline, distributions);
        if (evaluate->parsed())
            return run_evaluate(args, bundle_path, panel_path, schema_path, from_year);
        if (propensity->parsed())
            return run_propensity(args, bundle_path, panel_path, schema_path, from_year,
                                  targets_csv);
    } catch (const clv::VersionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const clv::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const clv::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
