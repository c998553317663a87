#pragma once

#include "mesekf/bspline.hpp"
#include "mesekf/chart_projection.hpp"
#include "mesekf/constrained.hpp"
#include "mesekf/errors.hpp"
#include "mesekf/estimator.hpp"
#include "mesekf/manifold.hpp"
#include "mesekf/numdiff.hpp"
#include "mesekf/rotation.hpp"
#include "mesekf/sensor_models.hpp"
