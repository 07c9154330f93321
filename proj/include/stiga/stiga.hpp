#pragma once

// Umbrella header for the space-time IgA heat solver.

#include "stiga/common.hpp"
#include "stiga/knot_vector.hpp"
#include "stiga/tensor_space.hpp"
#include "stiga/hierarchical.hpp"
#include "stiga/quadrature.hpp"
#include "stiga/geometry.hpp"
#include "stiga/sparse.hpp"
#include "stiga/parallel.hpp"
#include "stiga/problems.hpp"
#include "stiga/fields.hpp"
#include "stiga/assembly.hpp"
#include "stiga/estimators.hpp"
#include "stiga/adaptivity.hpp"
#include "stiga/report.hpp"
