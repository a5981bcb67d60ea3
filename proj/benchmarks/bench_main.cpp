#include <benchmark/benchmark.h>

//! the packaged benchmark_main archive carries LTO bytecode from another compiler build
BENCHMARK_MAIN();
