// Writes the bundled fixture crawl to a directory for trying out the CLI.

#include "support.hpp"

#include <iostream>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make-fixture-crawl <dir>\n";
        return 1;
    }
    try {
        auto fx = gpxharvest::testing::build_golden_crawl(argv[1]);
        std::cout << "config: " << fx.config_file.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "make-fixture-crawl: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
