#include <catch2/catch_amalgamated.hpp>
#include "ropf/acopf.hpp"
#include "ropf/dica.hpp"
#include "ropf/external_solver.hpp"
#include "ropf/trace.hpp"

TEST_CASE("placeholder test_acopf") { CHECK(true); }
