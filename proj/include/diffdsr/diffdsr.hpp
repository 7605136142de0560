#pragma once

// Umbrella header for the diffdsr library.

#include "diffdsr/calibration.hpp"
#include "diffdsr/config.hpp"
#include "diffdsr/degradation.hpp"
#include "diffdsr/depth_field.hpp"
#include "diffdsr/distributions.hpp"
#include "diffdsr/error.hpp"
#include "diffdsr/evaluation.hpp"
#include "diffdsr/grid.hpp"
#include "diffdsr/pfm.hpp"
#include "diffdsr/pipeline.hpp"
#include "diffdsr/rng.hpp"
#include "diffdsr/sampling.hpp"
#include "diffdsr/scenegen.hpp"
#include "diffdsr/schedule.hpp"
#include "diffdsr/selection.hpp"
