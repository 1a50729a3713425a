#pragma once

#include "twoscale/geometry.hpp"
#include "twoscale/expression.hpp"
#include "twoscale/coefficient.hpp"
#include "twoscale/sparse.hpp"
#include "twoscale/mesh.hpp"
#include "twoscale/assembly.hpp"
#include "twoscale/unfolding.hpp"
#include "twoscale/extension.hpp"
#include "twoscale/cell_problem.hpp"
#include "twoscale/fine_solver.hpp"
#include "twoscale/homogenized.hpp"
#include "twoscale/config.hpp"
#include "twoscale/report.hpp"
#include "twoscale/runner.hpp"
