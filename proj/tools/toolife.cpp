// Command-line front end: train, evaluate, analyze, rainflow, mesh.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "toolife/error.hpp"
#include "toolife/fatigue.hpp"
#include "toolife/harness.hpp"

namespace fs = std::filesystem;
using namespace toolife;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

int cmd_train(const std::string& config_path, const std::string& variant, const std::optional<std::uint64_t>& seed,
              const std::optional<int>& episodes, const std::string& output, bool resume) {
    harness::RunConfig cfg = harness::load_config(config_path);
    if (!variant.empty()) cfg.variant = reward::parse_variant(variant);
    if (seed) cfg.seed = *seed;
    if (episodes) cfg.episodes = *episodes;
    if (!output.empty()) cfg.output_dir = output;
    cfg.validate();
    harness::TrainOptions opts;
    opts.resume = resume;
    opts.log = &std::cerr;
    const auto result = harness::train(cfg, opts);
    std::cout << "trained " << result.records.size() << " episodes; checkpoint " << result.checkpoint_path << '\n';
    return 0;
}

int cmd_evaluate(const std::vector<std::string>& checkpoints, int trials, const std::optional<std::uint64_t>& seed,
                 const std::string& output) {
    if (trials < 0) throw ConfigError("--trials must be >= 0");
    std::vector<harness::EvalSummary> rows;
    for (const auto& path : checkpoints) {
        harness::LoadedRun run = harness::load_run(checkpoint::read_file(path));
        rows.push_back(harness::evaluate(run, trials, seed));
    }
    const fs::path dir = output.empty() ? fs::path(checkpoints.front()).parent_path() : fs::path(output);
    if (!dir.empty()) fs::create_directories(dir);
    {
        auto csv = open_out(dir / "eval.csv");
        harness::write_eval_csv(csv, rows);
    }
    {
        auto svg = open_out(dir / "eval.svg");
        harness::write_eval_svg(svg, rows);
    }
    harness::write_eval_csv(std::cout, rows);
    return 0;
}

int cmd_analyze(const std::string& checkpoint_path, const std::optional<std::uint64_t>& seed,
                const std::string& output) {
    harness::LoadedRun run = harness::load_run(checkpoint::read_file(checkpoint_path));
    const harness::StressAnalysis a = harness::analyze_stress(run, seed);
    const fs::path dir = output.empty() ? fs::path(checkpoint_path).parent_path() : fs::path(output);
    if (!dir.empty()) fs::create_directories(dir);
    {
        auto csv = open_out(dir / "heatmap.csv");
        harness::write_heatmap_csv(csv, a);
    }
    {
        auto svg = open_out(dir / "heatmap.svg");
        harness::write_heatmap_svg(svg, run.tool->mesh(), a.element_rul);
    }
    {
        auto traj = open_out(dir / "trajectory.csv");
        harness::write_trajectory_csv(traj, a.episode);
    }
    std::cout << "weakest element " << a.weakest_element << " rul " << a.element_rul.at(a.weakest_element)
              << " success " << a.episode.success << '\n';
    return 0;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& s, std::size_t row, std::size_t col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("row " + std::to_string(row) + ", column " + std::to_string(col) + ": '" + s +
                    "' is not a number");
}

// One row per time sample, one column per element. An optional header row
// is skipped; a first header cell named "time" marks a time column.
int cmd_rainflow(const std::string& input, double sn_a, double sn_b, bool drop_residuals) {
    std::ifstream in(input);
    if (!in) throw ConfigError("cannot open " + input);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool time_column = false;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (rows.empty() && row == 1 && !cells.empty() && !std::isdigit(static_cast<unsigned char>(cells[0][0])) &&
            cells[0][0] != '-' && cells[0][0] != '.' && cells[0][0] != '+') {
            time_column = cells[0] == "time";
            continue;
        }
        std::vector<double> values;
        for (std::size_t c = 0; c < cells.size(); ++c) values.push_back(parse_cell(cells[c], row, c + 1));
        if (!rows.empty() && values.size() != rows.front().size()) {
            throw DataError("row " + std::to_string(row) + " has " + std::to_string(values.size()) +
                            " columns, expected " + std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw DataError(input + " holds no samples");
    const std::size_t first = time_column ? 1 : 0;
    if (rows.front().size() <= first) throw DataError(input + " has no stress columns");

    fatigue::StressHistory history(rows.front().size() - first);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double t = time_column ? rows[k][0] : static_cast<double>(k);
        history.append(t, std::span<const double>(rows[k]).subspan(first));
    }
    const fatigue::SnCurve curve{sn_a, sn_b};
    curve.validate();
    const auto f = fatigue::analyze_history(history, curve, {!drop_residuals});

    std::cout << "element,cycles,damage,rul\n";
    char buf[256];
    for (std::size_t e = 0; e < history.element_count(); ++e) {
        double n = 0.0;
        for (const auto& c : f.series[e]) n += c.count;
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e, n, f.damage[e], f.rul.per_element[e]);
        std::cout << buf;
    }
    std::cerr << "tool rul " << f.rul.tool_rul << " (element " << f.rul.weakest_element << ")\n";
    return 0;
}

int cmd_mesh(const std::string& output) {
    const fea::Mesh mesh = harness::rake_tool_mesh();
    mesh.validate();
    if (output.empty() || output == "-") {
        fea::write_mesh(std::cout, mesh);
    } else {
        fea::write_mesh_file(output, mesh);
        std::cerr << mesh.node_count() << " nodes, " << mesh.element_count() << " elements -> " << output << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lifespan-aware tool-use training and fatigue analysis"};
    app.require_subcommand(1);

    std::string config_path, variant, output;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;
    bool resume = false;
    auto* train = app.add_subcommand("train", "Train one variant");
    train->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--variant", variant, "ours | baseline | ours_no_arn | torque");
    train->add_option("--seed", seed, "Override the config seed");
    train->add_option("--episodes", episodes, "Override the episode count");
    train->add_option("--output", output, "Override the output directory");
    train->add_flag("--resume", resume, "Continue from the output directory's checkpoint");

    std::vector<std::string> checkpoints;
    int trials = 100;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate trained checkpoints");
    evaluate->add_option("--checkpoint", checkpoints, "Checkpoint file (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--trials", trials, "Deterministic-policy trials per checkpoint");
    evaluate->add_option("--seed", seed, "First reset seed");
    evaluate->add_option("--output", output, "Directory for eval.csv and eval.svg");

    std::string checkpoint_path;
    auto* analyze = app.add_subcommand("analyze", "Per-element RUL heatmap of one rollout");
    analyze->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
    analyze->add_option("--seed", seed, "Reset seed");
    analyze->add_option("--output", output, "Directory for heatmap.csv, heatmap.svg, trajectory.csv");

    std::string input;
    double sn_a = 1.0e31, sn_b = 5.0;
    bool drop_residuals = false;
    auto* rainflow = app.add_subcommand("rainflow", "Fatigue analysis of a stress CSV");
    rainflow->add_option("--input", input, "CSV: one row per sample, one column per element")->required();
    rainflow->add_option("--sn-a", sn_a, "Basquin coefficient a");
    rainflow->add_option("--sn-b", sn_b, "Basquin exponent b");
    rainflow->add_flag("--drop-residuals", drop_residuals, "Ignore residual half-cycles");

    auto* mesh = app.add_subcommand("mesh", "Write the reference rake tool mesh");
    mesh->add_option("--output", output, "Destination file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train) return cmd_train(config_path, variant, seed, episodes, output, resume);
        if (*evaluate) return cmd_evaluate(checkpoints, trials, seed, output);
        if (*analyze) return cmd_analyze(checkpoint_path, seed, output);
        if (*rainflow) return cmd_rainflow(input, sn_a, sn_b, drop_residuals);
        if (*mesh) return cmd_mesh(output);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const VersionError& e) {
        std::cerr << "version error: " << e.what() << '\n';
        return 2;
    } catch (const MeshError& e) {
        std::cerr << "mesh error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalFault& e) {
        std::cerr << "numerical fault: " << e.what() << '\n';
        return 3;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << " (pivot ratio " << e.condition_estimate() << ")\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
