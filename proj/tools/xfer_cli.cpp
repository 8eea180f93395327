// xfer: learning and transfer experiments on the simulated vehicles.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "xfer/experiment.hpp"

namespace {

using Command = xfer::CommandResult (*)(const xfer::ExperimentConfig&, const std::filesystem::path&,
                                        const xfer::Logger&);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-robot, multi-task transfer learning experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON experiment config (defaults when omitted)");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", seed, "Override the config seed");
    app.add_flag("--quiet", quiet, "Only report errors");

    struct Entry {
        const char* name;
        const char* help;
        Command run;
    };
    const Entry entries[] = {
        {"learn", "Learn every configured trajectory on the source plant", xfer::cmd_learn},
        {"transfer", "Transfer one learned trajectory to the target plant and keep learning", xfer::cmd_transfer},
        {"matrix", "One-to-all transfer matrix", xfer::cmd_matrix},
        {"repeat", "Repeated transfer and learning with distinct seeds", xfer::cmd_repeat},
        {"diff-ref", "Matrix with a different target reference model", xfer::cmd_diff_ref},
        {"relative-degree", "Relative degree, minimum phase and L1-norm checks", xfer::cmd_relative_degree},
    };
    for (const auto& e : entries) app.add_subcommand(e.name, e.help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : xfer::kExitConfig;
    }

    const xfer::Logger log = [quiet](const std::string& msg) {
        if (!quiet) std::cerr << msg << '\n';
    };
    try {
        auto cfg = config_path.empty() ? xfer::ExperimentConfig::defaults() : xfer::load_config(config_path);
        if (seed) cfg.seed = *seed;
        for (const auto& e : entries) {
            if (!app.got_subcommand(e.name)) continue;
            const auto result = e.run(cfg, out_dir, log);
            if (!quiet)
                for (const auto& f : result.files) std::cout << f.string() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return xfer::exit_code_for(e);
    }
    return xfer::kExitOk;
}
