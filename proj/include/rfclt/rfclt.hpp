#pragma once

#include "rfclt/coefficients.hpp"
#include "rfclt/config.hpp"
#include "rfclt/convolution.hpp"
#include "rfclt/errors.hpp"
#include "rfclt/experiment.hpp"
#include "rfclt/finite_oracle.hpp"
#include "rfclt/functional.hpp"
#include "rfclt/innovations.hpp"
#include "rfclt/lattice.hpp"
#include "rfclt/limit_tests.hpp"
#include "rfclt/models.hpp"
#include "rfclt/parallel.hpp"
#include "rfclt/projective.hpp"
#include "rfclt/rng.hpp"
#include "rfclt/statistics.hpp"
