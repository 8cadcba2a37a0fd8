#pragma once

#include "analytics.hpp"
#include "dqn.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "features.hpp"
#include "geometry.hpp"
#include "instance.hpp"
#include "kv_config.hpp"
#include "mlp.hpp"
#include "policies.hpp"
#include "random.hpp"
#include "routing.hpp"
#include "simulator.hpp"
