#pragma once

#include "curvedbody/conserved.hpp"
#include "curvedbody/dynamics.hpp"
#include "curvedbody/error.hpp"
#include "curvedbody/geometry.hpp"
#include "curvedbody/integrators.hpp"
#include "curvedbody/potentials.hpp"
#include "curvedbody/runner.hpp"
#include "curvedbody/scenario.hpp"
