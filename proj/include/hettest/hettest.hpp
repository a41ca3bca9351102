#pragma once

// Heteroscedasticity testing with dimension-reduction model adaptation.

#include "hettest/errors.hpp"
#include "hettest/types.hpp"
#include "hettest/kernels.hpp"
#include "hettest/smoothing.hpp"
#include "hettest/sdr.hpp"
#include "hettest/hetero_tests.hpp"
#include "hettest/random.hpp"
#include "hettest/scenarios.hpp"
#include "hettest/harness.hpp"
#include "hettest/io.hpp"
