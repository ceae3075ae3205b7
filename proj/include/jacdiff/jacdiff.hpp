#pragma once

#include "jacdiff/error.hpp"
#include "jacdiff/error_model.hpp"
#include "jacdiff/estimator.hpp"
#include "jacdiff/harness.hpp"
#include "jacdiff/jacobi.hpp"
#include "jacdiff/kernel.hpp"
#include "jacdiff/kernel_io.hpp"
#include "jacdiff/quadrature.hpp"
#include "jacdiff/special.hpp"
#include "jacdiff/test_functions.hpp"
