#pragma once

// Umbrella header for the whole library.

#include "closedobs/dmaps.hpp"
#include "closedobs/embedding.hpp"
#include "closedobs/error.hpp"
#include "closedobs/generators.hpp"
#include "closedobs/interp.hpp"
#include "closedobs/model.hpp"
#include "closedobs/parallel.hpp"
#include "closedobs/timeseries.hpp"
#include "closedobs/validate.hpp"
