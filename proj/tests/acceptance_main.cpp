#include <cstring>
#include <iostream>
#include <string>

#include "kcore/acceptance.hpp"

int main(int argc, char** argv) {
    kcore::acceptance::Options opt;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--quick") opt.quick = true;
        else if (arg == "--full") opt.quick = false;
        else if (arg == "--seed" && i + 1 < argc) opt.seed = std::stoull(argv[++i]);
        else if (arg == "--jobs" && i + 1 < argc) opt.jobs = std::stoi(argv[++i]);
        else if (arg == "--only" && i + 1 < argc) opt.only = std::stoi(argv[++i]);
        else {
            std::cerr << "usage: acceptance [--quick|--full] [--seed S] [--jobs J] [--only N]\n";
            return 2;
        }
    }
    auto results = kcore::acceptance::run_all(opt, std::cout);
    return kcore::acceptance::all_passed(results) ? 0 : 1;
}
