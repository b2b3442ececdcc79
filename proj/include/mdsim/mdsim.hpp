#pragma once

#include "mdsim/core.hpp"
#include "mdsim/veremi.hpp"
#include "mdsim/features.hpp"
#include "mdsim/lstm.hpp"
#include "mdsim/training.hpp"
#include "mdsim/detector.hpp"
#include "mdsim/pipeline.hpp"
#include "mdsim/platoon.hpp"
#include "mdsim/misbehavior.hpp"
#include "mdsim/defense.hpp"
#include "mdsim/simulation.hpp"
#include "mdsim/parallel.hpp"
#include "mdsim/campaign.hpp"
#include "mdsim/config.hpp"
