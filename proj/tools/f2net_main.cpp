// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/cli.hpp"

int main(int argc, char** argv) { return f2net::run(argc, argv); }
