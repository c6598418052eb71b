#pragma once

#include <string>
#include <vector>

namespace seqtag::cli {

// Entry point behind main(). Subcommands: preprocess, pretrain, train, eval,
// predict, inspect. Returns 0 on success, 2 on usage errors, 1 on runtime
// failures. SEQTAG_LOG=quiet silences per-step training output.
int run(const std::vector<std::string>& args);

}  // namespace seqtag::cli
