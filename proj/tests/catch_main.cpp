#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

int main(int argc, char* argv[]) {
    setenv("OPENBLAS_NUM_THREADS", "1", 0);
    return Catch::Session().run(argc, argv);
}
