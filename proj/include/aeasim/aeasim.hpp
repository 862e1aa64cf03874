#pragma once

#include "algorithms.hpp"
#include "core.hpp"
#include "ecga.hpp"
#include "engine.hpp"
#include "experiment.hpp"
#include "ga.hpp"
#include "gomea.hpp"
#include "problems.hpp"
#include "search.hpp"
#include "stats.hpp"
