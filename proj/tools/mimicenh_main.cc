// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/cli.h"

int main(int argc, char** argv) { return mimicenh::run_cli(argc, argv); }
