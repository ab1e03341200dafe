#include "lldiff/blasdispatch.hpp"
#include "lldiff/cli.hpp"

int main(int argc, char** argv) {
    lldiff::ensure_fast_blas(argc, argv);
    return lldiff::run_cli(argc, argv);
}
