#pragma once

#include "tlight/compare.hpp"
#include "tlight/csv.hpp"
#include "tlight/detection.hpp"
#include "tlight/estimators.hpp"
#include "tlight/experiment.hpp"
#include "tlight/modulation.hpp"
#include "tlight/optics.hpp"
#include "tlight/quadrature.hpp"
#include "tlight/random.hpp"
#include "tlight/theory.hpp"
