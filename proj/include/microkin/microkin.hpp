#pragma once
// Convenience header pulling in the whole library.

#include "microkin/config.hpp"
#include "microkin/core.hpp"
#include "microkin/csv.hpp"
#include "microkin/markov_channel.hpp"
#include "microkin/montecarlo.hpp"
#include "microkin/pde_master.hpp"
#include "microkin/renewal_pushpull.hpp"
#include "microkin/rng.hpp"
