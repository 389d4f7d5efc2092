#include "clvshadow/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"covariant Lyapunov vectors, shadowing directions, and sensitivities of "
                 "long-time averages for chaotic flows and maps"};
    app.require_subcommand(1);

    std::string config_path, out_dir, format;
    std::uint64_t seed = 0;

    const std::pair<const char*, const char*> subs[] = {
        {"clv", "compute covariant vectors and Lyapunov exponents"},
        {"shadow", "construct tangent and adjoint shadowing directions"},
        {"sens", "estimate d<J>/ds with the requested methods"},
        {"verify", "run the structural property suite and report pass/fail"},
        {"fd", "run the ensemble finite-difference reference"},
    };
    for (const auto& [name, desc] : subs) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "master seed (overrides config)");
        sub->add_option("--format", format, "output format: json or csv (overrides config)")
            ->check(CLI::IsMember({"json", "csv"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "invalid-config: " << e.what() << std::endl;
        return clvshadow::exit_code_for(clvshadow::ErrorCode::invalid_config);
    }

    CLI::App* sub = app.get_subcommands().front();
    std::optional<std::uint64_t> seed_ov;
    std::optional<std::string> out_ov, format_ov;
    if (sub->count("--seed")) seed_ov = seed;
    if (sub->count("--out")) out_ov = out_dir;
    if (sub->count("--format")) format_ov = format;

    try {
        clvshadow::ExperimentConfig cfg =
            clvshadow::ExperimentConfig::load(config_path, seed_ov, out_ov, format_ov);
        return clvshadow::dispatch(sub->get_name(), cfg);
    } catch (const clvshadow::Error& e) {
        std::cerr << e.line() << std::endl;
        return clvshadow::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal-error: " << e.what() << std::endl;
        return 3;
    }
}
