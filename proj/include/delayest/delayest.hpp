#pragma once

#include "criteria.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "matrix_kernels.hpp"
#include "presets.hpp"
#include "simulators.hpp"
