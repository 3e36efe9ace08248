#pragma once

#include "ssc/digest.hpp"
#include "ssc/distributions.hpp"
#include "ssc/domain.hpp"
#include "ssc/error.hpp"
#include "ssc/geometry.hpp"
#include "ssc/inference.hpp"
#include "ssc/io.hpp"
#include "ssc/metrics.hpp"
#include "ssc/null_models.hpp"
#include "ssc/parallel.hpp"
#include "ssc/patterns.hpp"
#include "ssc/pipeline.hpp"
#include "ssc/rng.hpp"
#include "ssc/stpp.hpp"
#include "ssc/synth.hpp"
