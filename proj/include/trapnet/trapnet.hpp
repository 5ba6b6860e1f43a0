#pragma once

#include "trapnet/error.hpp"
#include "trapnet/rng.hpp"
#include "trapnet/metric_space.hpp"
#include "trapnet/measure.hpp"
#include "trapnet/network.hpp"
#include "trapnet/measure_metrics.hpp"
#include "trapnet/trap.hpp"
#include "trapnet/stats.hpp"
#include "trapnet/dynamics.hpp"
#include "trapnet/ensembles.hpp"
#include "trapnet/io.hpp"
#include "trapnet/experiments.hpp"
#include "trapnet/validate.hpp"
