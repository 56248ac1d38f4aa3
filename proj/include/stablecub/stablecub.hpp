#pragma once

#include "stablecub/cubature.hpp"
#include "stablecub/domains.hpp"
#include "stablecub/errors.hpp"
#include "stablecub/experiments.hpp"
#include "stablecub/pointsets.hpp"
#include "stablecub/polybasis.hpp"
#include "stablecub/solvers.hpp"
#include "stablecub/version.hpp"
