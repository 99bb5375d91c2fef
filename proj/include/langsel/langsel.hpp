#pragma once

#include "langsel/aggregate.hpp"
#include "langsel/error.hpp"
#include "langsel/manifest.hpp"
#include "langsel/metric.hpp"
#include "langsel/random.hpp"
#include "langsel/realign_loss.hpp"
#include "langsel/selector.hpp"
#include "langsel/typology.hpp"
