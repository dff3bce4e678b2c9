#pragma once

#include "stateval/chebyshev.hpp"
#include "stateval/error.hpp"
#include "stateval/liegroups.hpp"
#include "stateval/metrics.hpp"
#include "stateval/trajectory.hpp"
