// Umbrella header.

#pragma once

#include "mixanneal/annealing.hpp"
#include "mixanneal/core_em.hpp"
#include "mixanneal/datagen.hpp"
#include "mixanneal/graph.hpp"
#include "mixanneal/io.hpp"
#include "mixanneal/metrics.hpp"
#include "mixanneal/stability.hpp"
#include "mixanneal/trace.hpp"
#include "mixanneal/transitions.hpp"
#include "mixanneal/types.hpp"
