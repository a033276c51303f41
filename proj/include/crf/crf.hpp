#pragma once

#include "crf/types.hpp"
#include "crf/stats.hpp"
#include "crf/quadrature.hpp"
#include "crf/random.hpp"
#include "crf/core.hpp"
#include "crf/kernels.hpp"
#include "crf/estimators.hpp"
#include "crf/asymptotics.hpp"
#include "crf/measures.hpp"
#include "crf/optimize.hpp"
#include "crf/sampling.hpp"
#include "crf/config.hpp"
#include "crf/harness.hpp"
