#pragma once

#include "estimators.hpp"
#include "geometry.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "normal.hpp"
#include "rng.hpp"
#include "sampling.hpp"
