#pragma once

namespace pcdc::cli {

// Exit codes, one per error class.
constexpr int kExitOk = 0;
constexpr int kExitError = 1;       // contract violations, I/O, internal
constexpr int kExitConfig = 2;      // configuration / usage errors
constexpr int kExitFormat = 3;      // bitstream / file format errors
constexpr int kExitTraining = 4;    // training aborts
constexpr int kExitEstimation = 5;  // estimation unavailable

int run(int argc, const char* const* argv);

}  // namespace pcdc::cli
