// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_CLI_H_
#define MIMICENH_CLI_H_

namespace mimicenh {

// Full command-line entry point (subcommands: synth, train-am, train-enh,
// eval, compare-features). Exit codes: 0 success, 2 configuration or
// validation error, 3 data error, 4 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace mimicenh

#endif  // MIMICENH_CLI_H_
