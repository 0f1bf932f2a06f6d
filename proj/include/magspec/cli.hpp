#pragma once

// Command-line front end: field, dynamics, spectrum, weyl, sweep, report.
// Exit status 0 on success, 2 on configuration or usage errors, 1 otherwise.

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace magspec::cli {

struct Options; // option storage bound to the parser

class Cli {
public:
    // Human summaries go to `out`, diagnostics to `err`.
    Cli(std::ostream &out, std::ostream &err);
    ~Cli();
    Cli(const Cli &) = delete;
    Cli &operator=(const Cli &) = delete;

    // Parser with every subcommand and flag registered (for introspection).
    CLI::App &app();

    // Arguments without the program name.
    int run(const std::vector<std::string> &args);

private:
    int dispatch();

    std::ostream &out_;
    std::ostream &err_;
    std::unique_ptr<Options> opt_;
    std::unique_ptr<CLI::App> app_;
};

int main(int argc, char **argv);

} // namespace magspec::cli
