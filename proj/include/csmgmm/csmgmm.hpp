#pragma once

// Umbrella header for the library.

#include "config.hpp"
#include "data.hpp"
#include "error.hpp"
#include "estimation.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "model.hpp"
#include "regression.hpp"
#include "simulation.hpp"
#include "version.hpp"
