#pragma once

#include "activations.hpp"
#include "data_io.hpp"
#include "deep.hpp"
#include "error.hpp"
#include "finite_width.hpp"
#include "fixed_point.hpp"
#include "gp_regression.hpp"
#include "kernels.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "special_functions.hpp"
