// SPDX-License-Identifier: Apache-2.0
//
// Regenerates the frozen logits golden file from the committed fixture
// bundle. Run once after (re)training the fixture; the output is committed
// and guards the forward pass against regressions.
//
//   make_golden <bundle_dir> <corpus_file> <out_file>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <span>

#include "autoprune/model_eval.hpp"

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: make_golden <bundle_dir> <corpus_file> <out_file>\n";
        return 2;
    }
    try {
        const auto bundle = autoprune::load_bundle(argv[1]);
        const auto corpus = autoprune::load_corpus(argv[2]);
        const std::size_t seq = bundle.topology.max_seq_len;
        std::span<const std::uint32_t> window(corpus.tokens.data(), seq);
        const auto logits = autoprune::eval::forward(bundle, window);

        std::ofstream out(argv[3], std::ios::binary);
        out.write(reinterpret_cast<const char*>(logits.data()),
                  std::streamsize(logits.size() * sizeof(double)));
        if (!out.flush()) {
            std::cerr << "error: failed writing " << argv[3] << "\n";
            return 1;
        }
        std::cout << "wrote " << argv[3] << " (" << logits.rows() << "x" << logits.cols()
                  << " float64)\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
