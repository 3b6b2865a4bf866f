#pragma once

#include "tba/assignment.hpp"
#include "tba/confidence_model.hpp"
#include "tba/episode.hpp"
#include "tba/episode_log.hpp"
#include "tba/errors.hpp"
#include "tba/experiment.hpp"
#include "tba/geometry.hpp"
#include "tba/hungarian.hpp"
#include "tba/lifecycle.hpp"
#include "tba/metrics.hpp"
#include "tba/oracle.hpp"
#include "tba/query.hpp"
#include "tba/rng.hpp"
#include "tba/world.hpp"
