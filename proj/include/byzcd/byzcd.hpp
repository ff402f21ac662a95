#pragma once

#include "byzcd/rng.hpp"
#include "byzcd/model.hpp"
#include "byzcd/cusum.hpp"
#include "byzcd/rules.hpp"
#include "byzcd/adversary.hpp"
#include "byzcd/analytics.hpp"
#include "byzcd/montecarlo.hpp"
#include "byzcd/report.hpp"
#include "byzcd/config.hpp"
#include "byzcd/validation.hpp"
