#pragma once

#include "mecopt/admm.hpp"
#include "mecopt/association.hpp"
#include "mecopt/beamforming.hpp"
#include "mecopt/caching.hpp"
#include "mecopt/config.hpp"
#include "mecopt/core_model.hpp"
#include "mecopt/evaluation.hpp"
#include "mecopt/io.hpp"
#include "mecopt/model.hpp"
#include "mecopt/popularity.hpp"
#include "mecopt/rng.hpp"
#include "mecopt/sca.hpp"
#include "mecopt/types.hpp"
#include "mecopt/wmmse.hpp"
