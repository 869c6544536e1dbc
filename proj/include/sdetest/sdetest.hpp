#pragma once

#include "sdetest/config.hpp"
#include "sdetest/distributions.hpp"
#include "sdetest/error.hpp"
#include "sdetest/estimate.hpp"
#include "sdetest/format.hpp"
#include "sdetest/hypothesis_tests.hpp"
#include "sdetest/model.hpp"
#include "sdetest/montecarlo.hpp"
#include "sdetest/numdiff.hpp"
#include "sdetest/optimize.hpp"
#include "sdetest/params.hpp"
#include "sdetest/quasi_likelihood.hpp"
#include "sdetest/rng.hpp"
#include "sdetest/simulate.hpp"
