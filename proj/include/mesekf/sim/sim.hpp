#pragma once

#include "mesekf/sim/filters.hpp"
#include "mesekf/sim/metrics.hpp"
#include "mesekf/sim/random.hpp"
#include "mesekf/sim/report.hpp"
#include "mesekf/sim/scenario.hpp"
#include "mesekf/sim/sensors.hpp"
#include "mesekf/sim/trajectory.hpp"
#include "mesekf/sim/trial.hpp"
