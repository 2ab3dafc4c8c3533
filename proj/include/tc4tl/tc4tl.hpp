#pragma once

#include "tc4tl/error.hpp"
#include "tc4tl/event.hpp"
#include "tc4tl/features.hpp"
#include "tc4tl/gbm.hpp"
#include "tc4tl/ingest.hpp"
#include "tc4tl/mlp.hpp"
#include "tc4tl/model_io.hpp"
#include "tc4tl/pathloss.hpp"
#include "tc4tl/random.hpp"
#include "tc4tl/scorer.hpp"
#include "tc4tl/synth.hpp"
#include "tc4tl/version.hpp"
