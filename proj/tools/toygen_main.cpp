// kqf-toygen: emit a small synthetic f32 mixture-of-experts model, used by
// tests and examples; output is fully determined by the seed

#include <cstdio>
#include <iostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "kqf/gguf.hpp"
#include "kqf/toygen.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic model generator"};
    std::string out_path;
    uint64_t seed = 42;
    app.add_option("-o,--output", out_path, "output model file")->required();
    app.add_option("--seed", seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        const kqf::ContainerFile model =
            kqf::toy_container(kqf::toy_arch(), seed);
        const std::string tmp = out_path + ".tmp";
        try {
            kqf::write_container(model, tmp);
            if (std::rename(tmp.c_str(), out_path.c_str()) != 0) {
                throw std::runtime_error("cannot move output into place: " +
                                         out_path);
            }
        } catch (...) {
            std::remove(tmp.c_str());
            throw;
        }
        std::cout << "wrote " << out_path << " (" << model.tensors.size()
                  << " tensors, seed " << seed << ")\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
