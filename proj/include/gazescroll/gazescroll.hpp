#pragma once

#include "gazescroll/core.hpp"
#include "gazescroll/stream.hpp"
#include "gazescroll/techniques.hpp"
#include "gazescroll/engine.hpp"
#include "gazescroll/calibration.hpp"
#include "gazescroll/simulate.hpp"
#include "gazescroll/analytics.hpp"
#include "gazescroll/session_io.hpp"
#include "gazescroll/campaign.hpp"
