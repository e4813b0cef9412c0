#pragma once

#include "fbgap/types.hpp"
#include "fbgap/linalg.hpp"
#include "fbgap/lattice.hpp"
#include "fbgap/potential.hpp"
#include "fbgap/fibre.hpp"
#include "fbgap/model.hpp"
#include "fbgap/bands.hpp"
#include "fbgap/discrete.hpp"
#include "fbgap/perturb.hpp"
