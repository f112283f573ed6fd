#pragma once

#include "mtts/oracles.hpp"

namespace mtts::testing {

using oracle::LmmInstance;
using oracle::random_lmm;
using oracle::random_spd;

}  // namespace mtts::testing
