#pragma once

#include "bethe/belief_propagation.hpp"
#include "bethe/core.hpp"
#include "bethe/covers.hpp"
#include "bethe/errors.hpp"
#include "bethe/exact.hpp"
#include "bethe/free_energy.hpp"
#include "bethe/io.hpp"
#include "bethe/lattice.hpp"
#include "bethe/log_sum_exp.hpp"
#include "bethe/models.hpp"
#include "bethe/optimize.hpp"
#include "bethe/polytope.hpp"
#include "bethe/pseudomarginals.hpp"
