#pragma once

// Umbrella header for the nucspin virtual-lab library.

#include "nucspin/cli.hpp"
#include "nucspin/config.hpp"
#include "nucspin/density_matrix.hpp"
#include "nucspin/experiments.hpp"
#include "nucspin/fitting.hpp"
#include "nucspin/io.hpp"
#include "nucspin/math.hpp"
#include "nucspin/readout.hpp"
#include "nucspin/rng.hpp"
#include "nucspin/spin_dynamics.hpp"
#include "nucspin/tomography.hpp"
#include "nucspin/version.hpp"
