#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dsc/errors.hpp"
#include "dsc/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct DataArgs {
    std::string path;
    std::string labels;        // IDX label file
    std::string label_column;  // CSV label column
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
    cmd->add_option("data", d.path, "Dataset: .csv file or IDX image file")->required();
    cmd->add_option("--labels", d.labels, "IDX label file");
    cmd->add_option("--label-column", d.label_column, "CSV label column (header name or index)");
}

dsc::Dataset load_data(const DataArgs& d) {
    const fs::path p(d.path);
    if (p.extension() == ".csv") {
        if (!d.labels.empty()) throw dsc::InvalidInput("--labels applies to IDX input; use --label-column for CSV");
        return dsc::load_csv(p, d.label_column.empty() ? std::nullopt : std::optional<std::string>(d.label_column));
    }
    if (!d.label_column.empty()) throw dsc::InvalidInput("--label-column applies to CSV input");
    return dsc::load_idx(p, d.labels.empty() ? std::nullopt : std::optional<fs::path>(d.labels));
}

struct ConfigArgs {
    std::string path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> clusters;
};

void add_config_options(CLI::App* cmd, ConfigArgs& c) {
    cmd->add_option("--config", c.path, "key = value config file");
    cmd->add_option("--seed", c.seed, "Override the config seed");
    cmd->add_option("--clusters", c.clusters, "Override K");
}

dsc::RunConfig load_run_config(const ConfigArgs& c) {
    dsc::RunConfig cfg = c.path.empty() ? dsc::RunConfig{} : dsc::load_config(c.path);
    if (c.seed) cfg.seed = *c.seed;
    if (c.clusters) cfg.clusters = *c.clusters;
    dsc::validate(cfg);
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw dsc::InvalidInput("cannot write " + path.string());
    out << text;
}

void print_report(const dsc::EvalReport& r, const std::string& label, const std::string& csv_path) {
    std::cout << "[" << label << "]\n" << dsc::to_text(r);
    if (!csv_path.empty()) write_text(csv_path, "run," + dsc::csv_header() + "\n" + label + "," + dsc::to_csv_row(r) + "\n");
}

void write_assignments(const fs::path& path, const std::vector<int>& a) {
    std::ofstream out(path);
    if (!out) throw dsc::InvalidInput("cannot write " + path.string());
    out << "index,cluster\n";
    for (std::size_t i = 0; i < a.size(); ++i) out << i << ',' << a[i] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep spectral clustering with a greedy Kmeans-friendly rotation"};
    app.require_subcommand(1);

    DataArgs data;
    ConfigArgs config;
    std::string out, ckpt, artifacts, mode = "dsc", method, report_csv;
    std::size_t dims = 2;
    bool final_kmeans = false;

    auto* pretrain = app.add_subcommand("pretrain", "Pretrain the autoencoder");
    add_data_options(pretrain, data);
    add_config_options(pretrain, config);
    pretrain->add_option("--out", out, "Checkpoint path")->required();

    auto* cluster = app.add_subcommand("cluster", "Run the clustering loop and save artifacts");
    add_data_options(cluster, data);
    add_config_options(cluster, config);
    cluster->add_option("--ckpt", ckpt, "Pretrained checkpoint")->required();
    cluster->add_option("--out", out, "Artifact directory")->required();
    cluster->add_option("--mode", mode, "dsc | ae_se | ae_gk");
    cluster->add_flag("--final-kmeans", final_kmeans, "Also report a fresh full-dataset kmeans");

    auto* ablate = app.add_subcommand("ablate", "Run one variant and report its scores");
    add_data_options(ablate, data);
    add_config_options(ablate, config);
    ablate->add_option("--ckpt", ckpt, "Pretrained checkpoint")->required();
    ablate->add_option("--mode", mode, "ae_kmeans | ae_ncut | ae_se | ae_gk | dsc")->required();
    ablate->add_option("--report-csv", report_csv, "Also write the report as CSV");

    auto* infer = app.add_subcommand("infer", "Assign new samples with a trained encoder");
    add_data_options(infer, data);
    infer->add_option("--artifacts", artifacts, "Artifact directory from `cluster`")->required();
    infer->add_option("--out", out, "Write index,cluster CSV");
    infer->add_option("--report-csv", report_csv, "Also write the report as CSV");

    auto* baseline = app.add_subcommand("baseline", "Raw-feature kmeans or normalised cut");
    add_data_options(baseline, data);
    add_config_options(baseline, config);
    baseline->add_option("--method", method, "kmeans | ncut")->required();
    baseline->add_option("--out", out, "Write index,cluster CSV");
    baseline->add_option("--report-csv", report_csv, "Also write the report as CSV");

    auto* export_cmd = app.add_subcommand("export-embeddings", "PCA of the embeddings as CSV");
    add_data_options(export_cmd, data);
    add_config_options(export_cmd, config);
    export_cmd->add_option("--ckpt", ckpt, "Checkpoint (clusters from a fresh kmeans)");
    export_cmd->add_option("--artifacts", artifacts, "Artifact directory (model and centroids)");
    export_cmd->add_option("--dims", dims, "2 or 3")->check(CLI::IsMember({2, 3}));
    export_cmd->add_option("--out", out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*pretrain) {
            const auto ds = load_data(data);
            const auto cfg = load_run_config(config);
            const auto res = dsc::run_pretrain(ds, cfg);
            dsc::save_checkpoint(res.model, out);
            fs::path log_path(out);
            log_path += ".log.csv";
            std::ostringstream log;
            log << "epoch,loss\n0," << res.log.initial_loss << '\n';
            for (std::size_t e = 0; e < res.log.epoch_losses.size(); ++e) log << e + 1 << ',' << res.log.epoch_losses[e] << '\n';
            write_text(log_path, log.str());
            std::cout << "pretrained " << res.log.epoch_losses.size() << " epochs, loss "
                      << (res.log.epoch_losses.empty() ? res.log.initial_loss : res.log.epoch_losses.back())
                      << "\ncheckpoint " << out << '\n';
        } else if (*cluster) {
            const auto ds = load_data(data);
            auto cfg = load_run_config(config);
            cfg.final_kmeans = cfg.final_kmeans || final_kmeans;
            const auto art = dsc::run_cluster(ds, dsc::load_checkpoint(ckpt), cfg, dsc::parse_mode(mode));
            dsc::save_artifacts(art, cfg, out);
            std::cout << "iterations " << art.iterations.size() << (art.converged ? " (converged)" : " (cap reached)")
                      << '\n';
            if (art.report) print_report(*art.report, std::string(dsc::mode_name(art.mode)), "");
            if (art.final_kmeans_report) print_report(*art.final_kmeans_report, "final_kmeans", "");
            std::cout << "artifacts " << out << '\n';
        } else if (*ablate) {
            const auto ds = load_data(data);
            const auto cfg = load_run_config(config);
            const auto m = dsc::parse_mode(mode);
            print_report(dsc::run_ablation(ds, dsc::load_checkpoint(ckpt), cfg, m), std::string(dsc::mode_name(m)),
                         report_csv);
        } else if (*infer) {
            const auto ds = load_data(data);
            const auto loaded = dsc::load_artifacts(artifacts);
            const auto res = dsc::run_infer(ds, loaded.model, loaded.centroids);
            if (!out.empty()) write_assignments(out, res.assignments);
            if (res.report) {
                print_report(*res.report, "infer", report_csv);
            } else {
                std::cout << "assigned " << res.assignments.size() << " samples (no labels to score)\n";
            }
        } else if (*baseline) {
            const auto ds = load_data(data);
            const auto cfg = load_run_config(config);
            const auto art = dsc::run_baseline(ds, cfg, method);
            if (!out.empty()) write_assignments(out, art.assignments);
            if (art.report) {
                print_report(*art.report, method, report_csv);
            } else {
                std::cout << "assigned " << art.assignments.size() << " samples (no labels to score)\n";
            }
        } else if (*export_cmd) {
            const auto ds = load_data(data);
            const auto cfg = load_run_config(config);
            dsc::MlpModel model;
            std::vector<int> assigned;
            if (!artifacts.empty()) {
                const auto loaded = dsc::load_artifacts(artifacts);
                model = loaded.model;
                assigned = dsc::run_infer(ds, model, loaded.centroids).assignments;
            } else if (!ckpt.empty()) {
                model = dsc::load_checkpoint(ckpt);
                const auto h = dsc::encode(model, ds.features);
                assigned = dsc::kmeans(h, dsc::resolve_clusters(ds, cfg), cfg.seed, {cfg.n_init, 300}).assignments;
            } else {
                throw dsc::InvalidInput("export-embeddings needs --ckpt or --artifacts");
            }
            dsc::export_embeddings(dsc::encode(model, ds.features), assigned, ds.labels, dims, out);
            std::cout << "wrote " << ds.size() << " rows to " << out << '\n';
        }
    } catch (const dsc::NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const dsc::InvalidConfig& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return 1;
    } catch (const dsc::InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const dsc::FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
