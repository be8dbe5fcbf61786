#include "commands.hpp"

#include <iostream>

int main(int argc, char **argv) {
    CLI::App app{"Closed-observable models from time series", "closedobs"};
    app.require_subcommand(1);
    std::optional<std::size_t> threads;
    app.add_option("--threads", threads, "Worker threads (default: available cores)")->envname("CLOSEDOBS_THREADS");

    cli::add_generate(app);
    cli::add_build(app);
    cli::add_simulate(app);
    cli::add_validate(app);
    cli::add_info(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        if (rc == 0) return 0;
        std::cerr << app.help();
        return 2;
    }

    try {
        closedobs::set_thread_count(threads.value_or(0));
        if (auto &action = cli::pending_action()) action();
    } catch (const closedobs::Error &e) {
        std::cerr << "error: " << closedobs::to_string(e.code()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
