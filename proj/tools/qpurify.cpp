#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qpurify/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Feedback purification of a monitored qubit: simulation, verification and dynamic programming"};
    app.require_subcommand(1);
    app.allow_extras();

    std::optional<std::string> config;
    std::optional<std::string> seed;
    std::optional<std::string> workers;
    std::optional<std::string> out;
    app.add_option("--config", config, "key = value file; flags override it");
    app.add_option("--seed", seed, "base RNG seed");
    app.add_option("--workers", workers, "worker threads for ensembles");
    app.add_option("--out", out, "output directory");

    for (const auto& [cmd, name] : qpurify::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->allow_extras();
        sub->footer("Any config key may be given as --key value.");
        (void)cmd;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : qpurify::kExitDomain;
    }

    std::vector<std::string> args{app.get_subcommands().front()->get_name()};
    if (config) {
        args.push_back("--config");
        args.push_back(*config);
    }
    for (auto* sub : app.get_subcommands())
        for (const auto& x : sub->remaining())
            args.push_back(x);
    for (const auto& x : app.remaining())
        args.push_back(x);
    const std::pair<const char*, std::optional<std::string>*> common[] = {
        {"--seed", &seed}, {"--workers", &workers}, {"--out", &out}};
    for (const auto& [flag, value] : common)
        if (*value) {
            args.push_back(flag);
            args.push_back(**value);
        }

    qpurify::RunConfig cfg;
    try {
        cfg = qpurify::parse_config(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return qpurify::kExitDomain;
    }
    std::cout << qpurify::serialize_config(cfg);
    const int code = qpurify::execute(cfg);
    std::cout << "exit " << code << '\n';
    return code;
}
